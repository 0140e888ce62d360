#pragma once

#include <span>
#include <vector>

namespace sks {

/// Square matrix whose entry (i,j) can be nonzero only when the cyclic
/// distance (i-j) mod n lies in [-hw, hw]. Rows of all assembled operators
/// (mass, bending, gradient, convection Jacobian) have this shape with
/// hw = order-1 because basis supports span `order` elements.
///
/// Storage is one compressed row of width min(2*hw+1, n) per matrix row;
/// when 2*hw+1 >= n the row is stored fully (small meshes where every pair
/// of basis functions overlaps, possibly around both ends of the circle).
class PeriodicBandMatrix {
 public:
  PeriodicBandMatrix(int n, int half_bandwidth);

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] int half_bandwidth() const noexcept { return hw_; }
  [[nodiscard]] bool stored_full() const noexcept { return width_ == n_; }

  /// True when (i,j) lies in the cyclic band.
  [[nodiscard]] bool in_band(int i, int j) const noexcept {
    if (stored_full()) return true;
    const int d = mod(j - i);
    return d <= hw_ || d >= n_ - hw_;
  }

  /// Entry value; zero outside the band.
  [[nodiscard]] double get(int i, int j) const noexcept {
    const int s = slot(i, j);
    return s < 0 ? 0.0 : a_[static_cast<size_t>(i) * width_ + s];
  }

  /// Accumulates into an in-band entry. (i,j) must satisfy in_band.
  void add(int i, int j, double v) noexcept { a_[static_cast<size_t>(i) * width_ + slot(i, j)] += v; }

  void set(int i, int j, double v) noexcept { a_[static_cast<size_t>(i) * width_ + slot(i, j)] = v; }

  /// this += alpha * other; shapes must match exactly.
  void add_scaled(double alpha, const PeriodicBandMatrix& other);

  void clear() { a_.assign(a_.size(), 0.0); }

  /// y = A x.
  void apply(std::span<const double> x, std::span<double> y) const;

  /// x^T A y.
  [[nodiscard]] double inner(std::span<const double> x, std::span<const double> y) const;

  /// Dense row-major copy (n*n), mainly for small-scale diagnostics.
  [[nodiscard]] std::vector<double> dense() const;

 private:
  [[nodiscard]] int mod(int d) const noexcept {
    d %= n_;
    return d < 0 ? d + n_ : d;
  }
  // Compressed column slot of (i,j), or -1 outside the band. Offsets
  // 0..hw map to slots hw..2*hw, offsets n-hw..n-1 to slots 0..hw-1.
  [[nodiscard]] int slot(int i, int j) const noexcept {
    const int d = mod(j - i);
    if (stored_full()) return d;
    if (d <= hw_) return hw_ + d;
    if (d >= n_ - hw_) return hw_ + d - n_;
    return -1;
  }

  int n_;
  int hw_;
  int width_;
  std::vector<double> a_;
};

}  // namespace sks
