#include "sks/spline.hpp"

#include <cmath>
#include <stdexcept>

namespace sks {
namespace {

// Values of the cardinal B-spline translates at a local coordinate t in
// [0,1]: after the call, vals[j] = M_order(t + j) for j = 0..order-1, where
// M_k is the order-k cardinal B-spline supported on [0,k]. One triangular
// pass of the stable two-term recurrence.
void cardinal_values(int order, double t, double* vals) {
  vals[0] = 1.0;
  for (int m = 1; m < order; ++m) {
    // vals[0..m-1] hold M_m(t+j); produce M_{m+1}(t+j) for j = 0..m via
    // M_{m+1}(s) = (s*M_m(s) + (m+1-s)*M_m(s-1)) / m.
    vals[m] = (1.0 - t) * vals[m - 1] / m;
    for (int j = m - 1; j >= 1; --j)
      vals[j] = ((t + j) * vals[j] + (m + 1.0 - t - j) * vals[j - 1]) / m;
    vals[0] = t * vals[0] / m;
  }
}

// Derivative values: vals[j] = d^d/dt^d M_order(t + j), j = 0..order-1,
// obtained from order (order-d) values by d first differences, using
// M_k'(s) = M_{k-1}(s) - M_{k-1}(s-1).
void cardinal_derivative_values(int order, int deriv, double t, double* vals) {
  const int base = order - deriv;
  cardinal_values(base, t, vals);
  for (int m = base; m < order; ++m) {
    vals[m] = -vals[m - 1];
    for (int j = m - 1; j >= 1; --j) vals[j] = vals[j] - vals[j - 1];
  }
}

}  // namespace

SplineSpace::SplineSpace(double length, int elements, int order)
    : length_(length),
      elements_(elements),
      order_(order),
      h_(length / elements),
      quad_(QuadratureRule::gauss_legendre((3 * order - 2 + 1) / 2)) {
  if (!(length > 0.0)) throw std::invalid_argument("SplineSpace: length must be positive");
  if (order < 4 || order > kMaxOrder)
    throw std::invalid_argument("SplineSpace: order must be 4, 5, or 6");
  if (elements < order)
    throw std::invalid_argument("SplineSpace: need at least `order` elements");

  for (int d = 0; d <= 2; ++d) {
    tables_[d].resize(static_cast<size_t>(quad_.size()) * order_);
    const double scale = std::pow(h_, -d);
    for (int g = 0; g < quad_.size(); ++g) {
      cardinal_derivative_values(order_, d, quad_.nodes()[g], &tables_[d][g * order_]);
      for (int j = 0; j < order_; ++j) tables_[d][g * order_ + j] *= scale;
    }
  }
}

BasisEval SplineSpace::basis(double x, int deriv) const {
  if (deriv < 0 || deriv > 4) throw std::invalid_argument("basis: deriv must be in 0..4");
  double xw = std::fmod(x, length_);
  if (xw < 0.0) xw += length_;
  double s = xw / h_;
  int m = static_cast<int>(s);
  if (m >= elements_) m = elements_ - 1;  // x == length after roundoff
  const double t = s - m;

  BasisEval out;
  out.count = order_;
  if (deriv >= order_) {
    for (int j = 0; j < order_; ++j) out.index[j] = global_index(m, j);
    return out;  // derivative of degree order-1 pieces vanishes a.e.
  }
  cardinal_derivative_values(order_, deriv, t, out.value.data());
  const double scale = std::pow(h_, -deriv);
  for (int j = 0; j < order_; ++j) {
    out.index[j] = global_index(m, j);
    out.value[j] *= scale;
  }
  return out;
}

double SplineSpace::value(std::span<const double> coeffs, double x, int deriv) const {
  const BasisEval b = basis(x, deriv);
  double v = 0.0;
  for (int j = 0; j < b.count; ++j) v += coeffs[b.index[j]] * b.value[j];
  return v;
}

double SplineSpace::mean(std::span<const double> coeffs) const {
  // Each basis function integrates to h, so the mean is the coefficient
  // average scaled by h*N/L = 1.
  double s = 0.0;
  for (const double c : coeffs) s += c;
  return s * h_ / length_;
}

Coefficients SplineSpace::zero_mean(std::span<const double> coeffs) const {
  Coefficients out(coeffs.begin(), coeffs.end());
  remove_mean(out);
  return out;
}

void SplineSpace::remove_mean(std::span<double> coeffs) const {
  const double m = mean(coeffs);
  for (double& c : coeffs) c -= m;
}

}  // namespace sks
