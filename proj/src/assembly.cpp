#include "sks/assembly.hpp"

#include <cmath>
#include <stdexcept>

namespace sks {
namespace {

PeriodicBandMatrix assemble_gram(const SplineSpace& space, int deriv) {
  const int n = space.size(), r = space.order(), nq = space.quadrature().size();
  PeriodicBandMatrix m(n, r - 1);
  const std::vector<double>& tab = space.local_table(deriv);
  for (int e = 0; e < n; ++e) {
    for (int g = 0; g < nq; ++g) {
      const double w = space.quad_weight(g);
      const double* t = &tab[static_cast<size_t>(g) * r];
      for (int a = 0; a < r; ++a) {
        const int ia = space.global_index(e, a);
        const double wa = w * t[a];
        for (int b = 0; b < r; ++b) m.add(ia, space.global_index(e, b), wa * t[b]);
      }
    }
  }
  return m;
}

}  // namespace

PeriodicBandMatrix assemble_mass(const SplineSpace& space) { return assemble_gram(space, 0); }
PeriodicBandMatrix assemble_bending(const SplineSpace& space) { return assemble_gram(space, 2); }
PeriodicBandMatrix assemble_gradient(const SplineSpace& space) { return assemble_gram(space, 1); }

std::vector<double> assemble_load(const SplineSpace& space,
                                  const std::function<double(double)>& f) {
  const int n = space.size(), nq = space.quadrature().size();
  std::vector<double> values(static_cast<size_t>(n) * nq);
  for (int e = 0; e < n; ++e)
    for (int g = 0; g < nq; ++g) values[static_cast<size_t>(e) * nq + g] = f(space.quad_point(e, g));
  return load_from_quad_values(space, values);
}

std::vector<double> load_from_quad_values(const SplineSpace& space,
                                          std::span<const double> values) {
  std::vector<double> load(space.size());
  load_from_quad_values(space, values, load);
  return load;
}

void load_from_quad_values(const SplineSpace& space, std::span<const double> values,
                           std::span<double> out) {
  const int n = space.size(), r = space.order(), nq = space.quadrature().size();
  for (int i = 0; i < n; ++i) out[i] = 0.0;
  const std::vector<double>& tab = space.local_table(0);
  for (int e = 0; e < n; ++e) {
    for (int g = 0; g < nq; ++g) {
      const double wf = space.quad_weight(g) * values[static_cast<size_t>(e) * nq + g];
      const double* t = &tab[static_cast<size_t>(g) * r];
      for (int j = 0; j < r; ++j) out[space.global_index(e, j)] += wf * t[j];
    }
  }
}

void eval_at_quad(const SplineSpace& space, std::span<const double> coeffs, int deriv,
                  std::span<double> out) {
  const int n = space.size(), r = space.order(), nq = space.quadrature().size();
  const std::vector<double>& tab = space.local_table(deriv);
  for (int e = 0; e < n; ++e) {
    for (int g = 0; g < nq; ++g) {
      const double* t = &tab[static_cast<size_t>(g) * r];
      double v = 0.0;
      for (int j = 0; j < r; ++j) v += coeffs[space.global_index(e, j)] * t[j];
      out[static_cast<size_t>(e) * nq + g] = v;
    }
  }
}

void convection(const SplineSpace& space, std::span<const double> coeffs, std::span<double> out) {
  const int n = space.size(), r = space.order(), nq = space.quadrature().size();
  const std::vector<double>& t0 = space.local_table(0);
  const std::vector<double>& t1 = space.local_table(1);
  for (int i = 0; i < n; ++i) out[i] = 0.0;
  for (int e = 0; e < n; ++e) {
    for (int g = 0; g < nq; ++g) {
      const double* b0 = &t0[static_cast<size_t>(g) * r];
      const double* b1 = &t1[static_cast<size_t>(g) * r];
      double v = 0.0, vp = 0.0;
      for (int j = 0; j < r; ++j) {
        const double c = coeffs[space.global_index(e, j)];
        v += c * b0[j];
        vp += c * b1[j];
      }
      const double w = space.quad_weight(g) * v * vp;
      for (int j = 0; j < r; ++j) out[space.global_index(e, j)] += w * b0[j];
    }
  }
}

void convection_jacobian(const SplineSpace& space, std::span<const double> coeffs,
                         PeriodicBandMatrix& out) {
  const int n = space.size(), r = space.order(), nq = space.quadrature().size();
  if (out.size() != n || out.half_bandwidth() != r - 1)
    throw std::invalid_argument("convection_jacobian: output shape mismatch");
  out.clear();
  const std::vector<double>& t0 = space.local_table(0);
  const std::vector<double>& t1 = space.local_table(1);
  for (int e = 0; e < n; ++e) {
    for (int g = 0; g < nq; ++g) {
      const double* b0 = &t0[static_cast<size_t>(g) * r];
      const double* b1 = &t1[static_cast<size_t>(g) * r];
      double v = 0.0, vp = 0.0;
      for (int j = 0; j < r; ++j) {
        const double c = coeffs[space.global_index(e, j)];
        v += c * b0[j];
        vp += c * b1[j];
      }
      const double w = space.quad_weight(g);
      for (int a = 0; a < r; ++a) {
        const int ia = space.global_index(e, a);
        const double wa = w * b0[a];
        for (int b = 0; b < r; ++b)
          out.add(ia, space.global_index(e, b), wa * (vp * b0[b] + v * b1[b]));
      }
    }
  }
}

Operators::Operators(const SplineSpace& space)
    : mass(assemble_mass(space)),
      bending(assemble_bending(space)),
      gradient(assemble_gradient(space)),
      mass_solver(std::make_unique<LinearSolver>(mass)) {}

double Operators::l2_norm(std::span<const double> c) const { return std::sqrt(std::max(0.0, mass.inner(c, c))); }
double Operators::h2_seminorm(std::span<const double> c) const { return std::sqrt(std::max(0.0, bending.inner(c, c))); }
double Operators::h1_seminorm(std::span<const double> c) const { return std::sqrt(std::max(0.0, gradient.inner(c, c))); }

Coefficients l2_project(const SplineSpace& space, const Operators& ops,
                        const std::function<double(double)>& f) {
  return ops.mass_solver->solve(assemble_load(space, f));
}

}  // namespace sks
