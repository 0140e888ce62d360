#include "sks/noise.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sks/rng.hpp"

namespace sks {

WienerPath::WienerPath(uint64_t seed, double horizon, int max_level)
    : seed_(seed), horizon_(horizon), max_level_(max_level) {
  if (!(horizon > 0.0)) throw std::invalid_argument("WienerPath: horizon must be positive");
  if (max_level < 0 || max_level > kMaxLevel)
    throw std::invalid_argument("WienerPath: max_level out of range");
  const int64_t count = int64_t{1} << max_level;
  finest_.resize(count);
  NormalGenerator gen(seed);
  const double sd = std::sqrt(horizon / static_cast<double>(count));
  for (double& dw : finest_) dw = sd * gen.normal();
}

std::vector<double> WienerPath::increments(int64_t steps) const {
  if (steps < 1 || (steps & (steps - 1)) != 0)
    throw std::invalid_argument("WienerPath: steps must be a power of two");
  const int64_t finest_count = int64_t{1} << max_level_;
  if (steps > finest_count)
    throw std::invalid_argument("WienerPath: steps exceeds the stored resolution");
  std::vector<double> cur = finest_;
  while (static_cast<int64_t>(cur.size()) > steps) {
    const size_t half = cur.size() / 2;
    for (size_t i = 0; i < half; ++i) cur[i] = cur[2 * i] + cur[2 * i + 1];
    cur.resize(half);
  }
  return cur;
}

double WienerPath::total() const noexcept {
  double s = 0.0;
  for (double dw : finest_) s += dw;
  return s;
}

DiffusionModel DiffusionModel::parse(std::string_view name, double lambda_if_linear) {
  if (name == "zero") return zero();
  if (name == "sin") return sine();
  if (name == "cos") return cosine();
  if (name == "rational") return rational();
  if (name == "linear") return linear(lambda_if_linear);
  throw std::invalid_argument("unknown diffusion model: " + std::string(name));
}

std::string DiffusionModel::name() const {
  switch (kind) {
    case Kind::zero: return "zero";
    case Kind::sine: return "sin";
    case Kind::cosine: return "cos";
    case Kind::rational: return "rational";
    case Kind::linear: return "linear";
  }
  return "?";
}

double DiffusionModel::operator()(double u) const noexcept {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::sine: return std::sin(u);
    case Kind::cosine: return std::cos(u);
    case Kind::rational: return u * u / (1.0 + u * u);
    case Kind::linear: return lambda * u;
  }
  return 0.0;
}

double DiffusionModel::l2_bound(double domain_length) const noexcept {
  if (kind == Kind::zero) return 0.0;
  if (bounded()) return std::sqrt(domain_length);
  return std::numeric_limits<double>::infinity();
}

double DiffusionModel::lipschitz() const noexcept {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::sine:
    case Kind::cosine: return 1.0;
    case Kind::rational: return 3.0 * std::sqrt(3.0) / 8.0;  // max of 2u/(1+u^2)^2
    case Kind::linear: return std::abs(lambda);
  }
  return 0.0;
}

void diffusion_load(const SplineSpace& space, const DiffusionModel& model,
                    std::span<const double> coeffs, std::span<double> quad_work,
                    std::span<double> load_out) {
  const int n = space.size(), nq = space.quadrature().size();
  eval_at_quad(space, coeffs, 0, quad_work);
  double mean = 0.0;
  for (int e = 0; e < n; ++e)
    for (int g = 0; g < nq; ++g) {
      double& v = quad_work[static_cast<size_t>(e) * nq + g];
      v = model(v);
      mean += space.quad_weight(g) * v;
    }
  mean /= space.length();
  for (int e = 0; e < n; ++e)
    for (int g = 0; g < nq; ++g) quad_work[static_cast<size_t>(e) * nq + g] -= mean;
  load_from_quad_values(space, quad_work, load_out);
}

Coefficients apply_diffusion(const SplineSpace& space, const Operators& ops,
                             const DiffusionModel& model, std::span<const double> coeffs) {
  std::vector<double> work(static_cast<size_t>(space.size()) * space.quadrature().size());
  std::vector<double> load(space.size());
  diffusion_load(space, model, coeffs, work, load);
  return ops.mass_solver->solve(load);
}

double lipschitz_probe(const SplineSpace& space, const DiffusionModel& model, int pairs,
                       uint64_t seed) {
  const int n = space.size(), nq = space.quadrature().size();
  NormalGenerator gen(seed);
  std::vector<double> u(n), v(n), uq(static_cast<size_t>(n) * nq), vq(uq.size());
  double worst = 0.0;
  for (int trial = 0; trial < pairs; ++trial) {
    const double scale = 0.25 + 4.0 * gen.uniform();
    for (int i = 0; i < n; ++i) {
      u[i] = scale * gen.normal();
      v[i] = u[i] + (trial % 2 ? 1.0 : 1e-3) * gen.normal();
    }
    eval_at_quad(space, u, 0, uq);
    eval_at_quad(space, v, 0, vq);
    double num = 0.0, den = 0.0;
    for (int e = 0; e < n; ++e)
      for (int g = 0; g < nq; ++g) {
        const size_t idx = static_cast<size_t>(e) * nq + g;
        const double w = space.quad_weight(g);
        const double db = model(uq[idx]) - model(vq[idx]);
        const double du = uq[idx] - vq[idx];
        num += w * db * db;
        den += w * du * du;
      }
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

}  // namespace sks
