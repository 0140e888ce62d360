#include "sks/band_matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace sks {

PeriodicBandMatrix::PeriodicBandMatrix(int n, int half_bandwidth)
    : n_(n), hw_(half_bandwidth), width_(std::min(2 * half_bandwidth + 1, n)) {
  if (n < 1 || half_bandwidth < 0) throw std::invalid_argument("PeriodicBandMatrix: bad shape");
  a_.assign(static_cast<size_t>(n_) * width_, 0.0);
}

void PeriodicBandMatrix::add_scaled(double alpha, const PeriodicBandMatrix& other) {
  if (other.n_ != n_ || other.hw_ != hw_)
    throw std::invalid_argument("add_scaled: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += alpha * other.a_[i];
}

void PeriodicBandMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n_; ++i) {
    const double* row = &a_[static_cast<size_t>(i) * width_];
    double s = 0.0;
    if (stored_full()) {
      for (int d = 0; d < n_; ++d) s += row[d] * x[(i + d) % n_];
    } else {
      for (int off = -hw_; off <= hw_; ++off) {
        int j = i + off;
        if (j < 0) j += n_;
        else if (j >= n_) j -= n_;
        s += row[hw_ + off] * x[j];
      }
    }
    y[i] = s;
  }
}

double PeriodicBandMatrix::inner(std::span<const double> x, std::span<const double> y) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    const double* row = &a_[static_cast<size_t>(i) * width_];
    double ri = 0.0;
    if (stored_full()) {
      for (int d = 0; d < n_; ++d) ri += row[d] * y[(i + d) % n_];
    } else {
      for (int off = -hw_; off <= hw_; ++off) {
        int j = i + off;
        if (j < 0) j += n_;
        else if (j >= n_) j -= n_;
        ri += row[hw_ + off] * y[j];
      }
    }
    s += x[i] * ri;
  }
  return s;
}

std::vector<double> PeriodicBandMatrix::dense() const {
  std::vector<double> d(static_cast<size_t>(n_) * n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) d[static_cast<size_t>(i) * n_ + j] = get(i, j);
  return d;
}

}  // namespace sks
