#pragma once

#include <array>
#include <span>
#include <vector>

#include "sks/quadrature.hpp"

namespace sks {

/// Coefficient vector of a periodic spline function, one entry per basis
/// function (length N).
using Coefficients = std::vector<double>;

/// Highest spline order accepted by SplineSpace.
inline constexpr int kMaxOrder = 6;

/// Values of the basis functions that are nonzero at one point.
///
/// Exactly `count` == order entries are populated: `index[j]` is a basis
/// index in [0, N) and `value[j]` the corresponding (derivative) value.
struct BasisEval {
  std::array<int, kMaxOrder> index{};
  std::array<double, kMaxOrder> value{};
  int count = 0;
};

/// Space of smooth periodic splines on a uniform mesh of [0, length].
///
/// The space has one basis function per mesh element: uniform B-splines of
/// order `order` (polynomial degree order-1, C^{order-2} smoothness), shifted
/// copies of one cardinal shape. Basis function i is supported on elements
/// i, i+1, ..., i+order-1 (mod N). Orders 4, 5, 6 are supported; all of them
/// embed the space into H^2, which the fourth-order operator requires.
///
/// The attached Gauss-Legendre rule has ceil((3*order-2)/2) points per
/// element and integrates products of three basis factors (total degree
/// 3*(order-1)) exactly, so assembled forms carry no quadrature error.
class SplineSpace {
 public:
  /// Builds the space; throws std::invalid_argument unless
  /// 4 <= order <= 6, elements >= order, and length > 0.
  SplineSpace(double length, int elements, int order);

  [[nodiscard]] double length() const noexcept { return length_; }
  [[nodiscard]] int size() const noexcept { return elements_; }
  [[nodiscard]] int order() const noexcept { return order_; }
  [[nodiscard]] double mesh_size() const noexcept { return h_; }
  [[nodiscard]] const QuadratureRule& quadrature() const noexcept { return quad_; }

  /// Evaluates the `deriv`-th derivative (0..4) of all basis functions that
  /// are nonzero at x. x is wrapped into [0, length) first.
  [[nodiscard]] BasisEval basis(double x, int deriv = 0) const;

  /// Evaluates the spline with the given coefficients at x.
  [[nodiscard]] double value(std::span<const double> coeffs, double x, int deriv = 0) const;

  /// Mean value of the spline over the domain: (1/L) * integral.
  [[nodiscard]] double mean(std::span<const double> coeffs) const;

  /// Returns coefficients shifted so the represented function has zero mean.
  [[nodiscard]] Coefficients zero_mean(std::span<const double> coeffs) const;

  /// In-place variant of zero_mean.
  void remove_mean(std::span<double> coeffs) const;

  // ---- element-wise quadrature access (used by assembly) ----

  /// Physical coordinate of quadrature node g inside element e.
  [[nodiscard]] double quad_point(int element, int g) const noexcept {
    return (element + quad_.nodes()[g]) * h_;
  }
  /// Physical quadrature weight of node g (independent of the element).
  [[nodiscard]] double quad_weight(int g) const noexcept { return quad_.weights()[g] * h_; }

  /// Cached local basis values at quadrature nodes. Entry [g*order + j] is
  /// the `deriv`-th derivative of the local shape j at node g; the global
  /// index of shape j on element e is (e - j) mod N. deriv in {0,1,2}.
  [[nodiscard]] const std::vector<double>& local_table(int deriv) const { return tables_[deriv]; }

  /// Global basis index of local shape j on the given element.
  [[nodiscard]] int global_index(int element, int j) const noexcept {
    const int i = element - j;
    return i >= 0 ? i : i + elements_;
  }

 private:
  double length_;
  int elements_;
  int order_;
  double h_;
  QuadratureRule quad_;
  std::array<std::vector<double>, 3> tables_;
};

}  // namespace sks
