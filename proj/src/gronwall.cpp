#include "sks/gronwall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sks/rng.hpp"

namespace sks {

namespace {

constexpr uint64_t kPathTag = 0x67726f6eULL;

GronwallPath sample_path(uint64_t seed, int horizon, const GronwallGeneratorOptions& options) {
  NormalGenerator gen(seed);
  const size_t len = static_cast<size_t>(horizon) + 1;
  GronwallPath path;
  path.m.assign(len, 0.0);
  path.g.assign(static_cast<size_t>(horizon), 0.0);
  std::vector<double> base(len, 0.0);

  // Base forcing, transform, rates. Every auxiliary uniform drawn at step j
  // belongs to the filtration at j, and the sign eta_j is a fresh draw, so
  // the transform coefficient never peeks ahead.
  base[0] = options.forcing_scale * (0.5 + 0.5 * gen.uniform());
  for (int j = 0; j < horizon; ++j) {
    const double u = gen.uniform();
    const double eta = gen.uniform() <= 0.5 ? -1.0 : 1.0;
    const double xi =
        options.transform_scale * (0.25 + 0.75 * u) * (path.m[j] > 0.0 ? 1.5 : 1.0);
    path.m[j + 1] = path.m[j] + xi * eta;
    path.g[j] = options.zero_rates ? 0.0 : options.rate_scale * gen.uniform();
    base[j + 1] = options.forcing_scale * (0.5 + 0.5 * gen.uniform());
  }

  // Lift the forcing by the running negative part of the martingale so the
  // right side of the hypothesis stays nonnegative, then fill x with a
  // random fraction of that right side.
  path.f.assign(len, 0.0);
  double lift = 0.0;
  for (size_t j = 0; j < len; ++j) {
    lift = std::max(lift, -path.m[j]);
    path.f[j] = base[j] + lift;
  }
  path.x.assign(len, 0.0);
  double used = 0.0;  // sum_{l<j} g[l] * x[l]
  for (size_t j = 0; j < len; ++j) {
    const double rhs = path.f[j] + path.m[j] + used;
    path.x[j] = gen.uniform() * rhs;
    if (j < path.g.size()) used += path.g[j] * path.x[j];
  }
  return path;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n - 1.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace

GronwallInstance generate_instance(uint64_t seed, int horizon, double q, double alpha,
                                   const GronwallGeneratorOptions& options) {
  if (horizon < 1) throw std::invalid_argument("gronwall: horizon must be >= 1");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("gronwall: q must lie in (0,1)");
  if (!(alpha >= 1.0)) throw std::invalid_argument("gronwall: alpha must be >= 1");
  if (!(q * alpha < 1.0))
    throw std::invalid_argument("gronwall: need q*alpha < 1, got " + std::to_string(q * alpha));
  if (options.samples < 1) throw std::invalid_argument("gronwall: samples must be >= 1");
  if (options.forcing_scale < 0 || options.transform_scale < 0 || options.rate_scale < 0)
    throw std::invalid_argument("gronwall: scales must be nonnegative");

  GronwallInstance inst;
  inst.horizon = horizon;
  inst.q = q;
  inst.alpha = alpha;
  inst.beta = alpha == 1.0 ? std::numeric_limits<double>::infinity() : alpha / (alpha - 1.0);
  inst.paths.reserve(static_cast<size_t>(options.samples));
  for (int64_t s = 0; s < options.samples; ++s)
    inst.paths.push_back(
        sample_path(derive_seed(seed, kPathTag, static_cast<uint64_t>(s)), horizon, options));
  return inst;
}

GronwallCheck verify_bound(const GronwallInstance& instance) {
  const size_t count = instance.paths.size();
  std::vector<double> sup_xq(count), sup_f(count), log_prod(count);
  for (size_t s = 0; s < count; ++s) {
    const GronwallPath& p = instance.paths[s];
    sup_xq[s] = std::pow(*std::max_element(p.x.begin(), p.x.end()), instance.q);
    sup_f[s] = *std::max_element(p.f.begin(), p.f.end());
    double lp = 0.0;
    for (double g : p.g) lp += std::log1p(g);
    log_prod[s] = instance.q * lp;
  }

  const MeanSe lhs = mean_and_se(sup_xq);
  const MeanSe fsup = mean_and_se(sup_f);

  // || prod (1+g)^q ||_{L^beta} in log space; beta can be large (it is the
  // conjugate of alpha close to 1), so prod^beta must never be formed.
  double log_norm;
  const double max_lp = *std::max_element(log_prod.begin(), log_prod.end());
  if (std::isinf(instance.beta)) {
    log_norm = max_lp;
  } else {
    double acc = 0.0;
    for (double lp : log_prod) acc += std::exp(instance.beta * (lp - max_lp));
    log_norm = max_lp + (std::log(acc) - std::log(static_cast<double>(count))) / instance.beta;
  }

  const double factor =
      std::pow(1.0 + 1.0 / (1.0 - instance.alpha * instance.q), 1.0 / instance.alpha);

  GronwallCheck check;
  check.lhs = lhs.mean;
  check.rhs = factor * std::exp(log_norm) * std::pow(fsup.mean, instance.q);
  const double rel_lhs = lhs.mean > 0 ? lhs.se / lhs.mean : 0.0;
  const double rel_f = fsup.mean > 0 ? instance.q * fsup.se / fsup.mean : 0.0;
  check.relative_se = std::sqrt(rel_lhs * rel_lhs + rel_f * rel_f);
  check.holds = check.lhs <= check.rhs * (1.0 + 3.0 * check.relative_se);
  return check;
}

std::vector<double> deterministic_gronwall(double a0, std::span<const double> rates,
                                           std::span<const double> sources) {
  if (rates.size() != sources.size())
    throw std::invalid_argument("gronwall: rates and sources must have equal length");
  std::vector<double> bound(rates.size() + 1);
  bound[0] = a0;
  for (size_t i = 0; i < rates.size(); ++i)
    bound[i + 1] = (1.0 + rates[i]) * bound[i] + sources[i];
  return bound;
}

}  // namespace sks
