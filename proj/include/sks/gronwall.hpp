#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sks {

/// One realization of the hypothesis data: nonnegative adapted sequences
/// x, f (length horizon+1), rates g (length horizon), and a martingale m
/// (length horizon+1, m[0] = 0) built as a transform of Rademacher signs.
/// The pathwise inequality
///   x[n] <= f[n] + m[n] + sum_{l<n} g[l]*x[l]
/// holds for every n by construction.
struct GronwallPath {
  std::vector<double> x;
  std::vector<double> f;
  std::vector<double> m;
  std::vector<double> g;
};

/// A Monte Carlo ensemble of hypothesis paths together with the exponent
/// q in (0,1) and the conjugate pair (alpha, beta), q*alpha < 1.
struct GronwallInstance {
  int horizon = 0;
  double q = 0.5;
  double alpha = 1.5;
  double beta = 3.0;  // alpha/(alpha-1); infinity when alpha = 1
  std::vector<GronwallPath> paths;
};

/// Knobs of the instance sampler. Scales are magnitudes of the forcing,
/// the martingale transform, and the growth rates; zero_rates forces g = 0.
struct GronwallGeneratorOptions {
  int64_t samples = 2048;
  double forcing_scale = 1.0;
  double transform_scale = 1.0;
  double rate_scale = 0.1;
  bool zero_rates = false;
};

/// Samples an ensemble satisfying the hypothesis pathwise. The martingale
/// is a transform sum xi_j * eta_j with eta_j independent signs and xi_j
/// bounded, positive, and measurable with respect to the past, so the
/// martingale property holds in distribution, not just on average.
/// Throws std::invalid_argument unless horizon >= 1, samples >= 1,
/// q in (0,1), alpha >= 1, q*alpha < 1, and all scales are nonnegative.
[[nodiscard]] GronwallInstance generate_instance(uint64_t seed, int horizon, double q,
                                                 double alpha,
                                                 const GronwallGeneratorOptions& options = {});

/// Monte Carlo estimate of both sides of the bound
///   E[sup_n x^q] <= (1 + 1/(1-alpha*q))^(1/alpha)
///                   * || prod_l (1+g[l])^q ||_{L^beta} * (E[sup_n f])^q
/// evaluated on the instance's own sample (beta = infinity uses the sample
/// maximum). `holds` allows three relative standard errors of slack.
struct GronwallCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_se = 0.0;
  bool holds = false;
};

[[nodiscard]] GronwallCheck verify_bound(const GronwallInstance& instance);

/// Majorant of the classical discrete Gronwall recursion: returns b with
/// b[0] = a0 and b[i+1] = (1 + rates[i]) * b[i] + sources[i]. Any sequence
/// a with a[0] <= a0 and a[i+1] <= (1 + rates[i]) * a[i] + sources[i] is
/// dominated elementwise. Inputs must be nonnegative and the two arrays
/// equally long.
[[nodiscard]] std::vector<double> deterministic_gronwall(double a0, std::span<const double> rates,
                                                         std::span<const double> sources);

}  // namespace sks
