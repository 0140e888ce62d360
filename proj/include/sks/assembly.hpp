#pragma once

#include <functional>
#include <memory>
#include <span>

#include "sks/band_matrix.hpp"
#include "sks/linear_solver.hpp"
#include "sks/spline.hpp"

namespace sks {

/// Gram matrix of basis values: (B_j, B_i). Symmetric positive definite.
[[nodiscard]] PeriodicBandMatrix assemble_mass(const SplineSpace& space);

/// Gram matrix of second derivatives: (B_j'', B_i''). Symmetric positive
/// semidefinite with kernel spanned by the constant function.
[[nodiscard]] PeriodicBandMatrix assemble_bending(const SplineSpace& space);

/// Gram matrix of first derivatives: (B_j', B_i'). Same kernel as bending.
[[nodiscard]] PeriodicBandMatrix assemble_gradient(const SplineSpace& space);

/// Load vector (f, B_i), f integrated by the element quadrature rule.
[[nodiscard]] std::vector<double> assemble_load(const SplineSpace& space,
                                                const std::function<double(double)>& f);

/// Load vector from point values at the quadrature nodes;
/// values[e*nq + g] = f(quad_point(e, g)).
[[nodiscard]] std::vector<double> load_from_quad_values(const SplineSpace& space,
                                                        std::span<const double> values);

/// In-place variant of load_from_quad_values; `out` (size N) is overwritten.
void load_from_quad_values(const SplineSpace& space, std::span<const double> values,
                           std::span<double> out);

/// Evaluates the spline derivative at every quadrature node;
/// out[e*nq + g] = (d^deriv v)(quad_point(e, g)), deriv in {0,1,2}.
void eval_at_quad(const SplineSpace& space, std::span<const double> coeffs, int deriv,
                  std::span<double> out);

/// Convection vector N(c)_i = (v v', B_i) of the spline v with the given
/// coefficients. The quadrature rule integrates the cubic-in-basis integrand
/// exactly, so c . N(c) = 0 and sum_i N(c)_i = 0 up to roundoff.
void convection(const SplineSpace& space, std::span<const double> coeffs, std::span<double> out);

/// Jacobian of the convection vector: dN_i/dc_j = (v' B_j + v B_j', B_i).
/// `out` must be shaped (N, order-1); it is overwritten.
void convection_jacobian(const SplineSpace& space, std::span<const double> coeffs,
                         PeriodicBandMatrix& out);

/// The assembled bilinear forms of one space plus a reusable factorization
/// of the mass matrix.
struct Operators {
  PeriodicBandMatrix mass;
  PeriodicBandMatrix bending;
  PeriodicBandMatrix gradient;
  std::unique_ptr<LinearSolver> mass_solver;

  explicit Operators(const SplineSpace& space);

  /// L2 norm of the spline with the given coefficients.
  [[nodiscard]] double l2_norm(std::span<const double> c) const;
  /// L2 norm of the second derivative.
  [[nodiscard]] double h2_seminorm(std::span<const double> c) const;
  /// L2 norm of the first derivative.
  [[nodiscard]] double h1_seminorm(std::span<const double> c) const;
};

/// Best L2 approximation of f in the space: solves mass * c = load(f).
[[nodiscard]] Coefficients l2_project(const SplineSpace& space, const Operators& ops,
                                      const std::function<double(double)>& f);

}  // namespace sks
