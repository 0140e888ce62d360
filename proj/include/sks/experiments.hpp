#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sks/assembly.hpp"
#include "sks/noise.hpp"
#include "sks/spline.hpp"
#include "sks/stepper.hpp"

namespace sks {

/// Knobs shared by every Monte Carlo experiment. The initial condition is
/// u0(x) = u0_amplitude * sin(2*pi*x/length). All per-path randomness
/// derives from (seed, experiment tag, path index), so results do not
/// depend on the worker count.
struct ExperimentConfig {
  double length = 6.283185307179586476925286766559;
  int order = 4;
  double viscosity = 1.0;
  double horizon = 0.25;
  DiffusionModel model = DiffusionModel::sine();
  double u0_amplitude = 1.0;
  int64_t mc_samples = 64;
  uint64_t seed = 1;
  int workers = 1;
  double newton_tol = 1e-10;
  int newton_max_iter = 30;
  std::vector<double> q_list = {0.5, 0.75};
};

/// A solver failure inside an experiment, annotated with which resolution
/// and which sample diverged so the run is reproducible in isolation.
class ExperimentDivergence : public NewtonDivergence {
 public:
  ExperimentDivergence(const NewtonDivergence& cause, std::string_view experiment, int64_t steps,
                       int elements, uint64_t path_seed, int64_t path_index);

  [[nodiscard]] const char* what() const noexcept override { return detail_.c_str(); }

  std::string experiment;
  int64_t steps;
  int elements;
  uint64_t path_seed;
  int64_t path_index;

 private:
  std::string detail_;
};

/// Error functionals of one (coarse, reference) trajectory pair along one
/// path: the sup-in-time L2 error over steps 1..M, the time-integrated
/// squared H2 seminorm error scaled by viscosity*dt, and the sup of the
/// squared L2 norm of the reference over its whole grid (the localization
/// statistic).
struct PathNorms {
  double sup_l2 = 0.0;
  double h2_sum = 0.0;
  double ref_sup_sq = 0.0;
};

/// Same-space pair: the reference step count must be an integer multiple of
/// the coarse step count; states are compared on the coarse grid.
[[nodiscard]] PathNorms error_norms(const Trajectory& coarse, const Trajectory& reference,
                                    const Operators& ops, double viscosity);

/// Values (and first two derivatives) of every basis function of a coarse
/// space at the quadrature nodes of a nested finer space, cached so that
/// cross-space norms cost one multiply per (node, local basis) pair. The
/// meshes must cover the same interval and the fine element count must be
/// a multiple of the coarse one; nested piecewise polynomials make the
/// fine quadrature exact for products of members of either space.
class CrossSpaceTable {
 public:
  CrossSpaceTable(const SplineSpace& coarse, const SplineSpace& fine);

  [[nodiscard]] const SplineSpace& coarse() const noexcept { return *coarse_; }
  [[nodiscard]] const SplineSpace& fine() const noexcept { return *fine_; }

  /// Evaluates the coarse spline at every fine quadrature node;
  /// out[e*nq + g] = (d^deriv v)(fine.quad_point(e, g)), deriv in {0,1,2}.
  void eval(std::span<const double> coarse_coeffs, int deriv, std::span<double> out) const;

 private:
  const SplineSpace* coarse_;
  const SplineSpace* fine_;
  int nodes_;
  std::vector<int> index_;
  std::vector<double> values_[3];
};

/// Cross-space pair on a common time grid (equal step counts); the coarse
/// trajectory lives in table.coarse(), the reference in table.fine().
[[nodiscard]] PathNorms error_norms(const Trajectory& coarse, const Trajectory& reference,
                                    const CrossSpaceTable& table, const Operators& reference_ops,
                                    double viscosity);

/// One moment of the sup-in-time error at a fixed resolution: mean and
/// standard error of sup^exponent, plus the indicator-weighted variants.
struct SupMoment {
  double exponent = 1.0;
  double mean = 0.0;
  double se = 0.0;
  double loc_mean = 0.0;
  double loc_se = 0.0;

  /// E[sup^p]^(1/p) and its first-order standard error.
  [[nodiscard]] double normalized() const;
  [[nodiscard]] double normalized_se() const;
  [[nodiscard]] double loc_normalized() const;
};

/// Monte Carlo aggregates of the error functionals at one resolution.
struct ErrorAggregate {
  int64_t samples = 0;
  double abscissa = 0.0;  // dt or mesh size of this level
  std::vector<SupMoment> sup_moments;
  double h2_mean = 0.0;  // E[viscosity * dt * sum ||d2 e||^2]
  double h2_se = 0.0;
  double loc_h2_mean = 0.0;
  double loc_h2_se = 0.0;
  double rho = std::numeric_limits<double>::infinity();
  double omega_probability = 1.0;

  [[nodiscard]] double h2_error() const;  // sqrt of h2_mean
  [[nodiscard]] const SupMoment& moment(double exponent) const;
};

/// Moment exponents implied by a q list: 2q for each q, plus the bootstrap
/// exponent 4*(1/2) = 2 if not already present. Sorted ascending.
[[nodiscard]] std::vector<double> sup_error_exponents(std::span<const double> q_list);

/// Reduces per-path norms at one resolution. rho = +infinity disables
/// localization (indicator identically one); rho = 0 with a nonzero
/// reference zeroes every localized value.
[[nodiscard]] ErrorAggregate aggregate_norms(std::span<const PathNorms> per_path,
                                             std::span<const double> exponents, double rho,
                                             double abscissa);

/// Log-log least-squares fit err ~ C * abscissa^slope. Requires >= 3
/// abscissae, strictly decreasing by exact factors of two, and positive
/// errors. fit_residual is the RMS log-residual; half_width is twice the
/// standard error of the slope.
struct RateReport {
  std::vector<double> abscissae;
  std::vector<double> errors;
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;
  double half_width = 0.0;
};

[[nodiscard]] RateReport fit_rate(std::span<const double> abscissae,
                                  std::span<const double> errors);

/// Aggregates of one resolution sweep, one entry per requested level in the
/// requested order (abscissae decrease dyadically). raw[i][p] holds the
/// unreduced functionals of path p at level i, in path order.
struct SweepResult {
  std::vector<ErrorAggregate> levels;
  std::vector<std::vector<PathNorms>> raw;

  [[nodiscard]] std::vector<double> abscissae() const;
  /// Normalized sup-error column for one moment exponent.
  [[nodiscard]] std::vector<double> sup_errors(double exponent) const;
  [[nodiscard]] std::vector<double> h2_errors() const;
  [[nodiscard]] std::vector<double> omega_probabilities() const;
};

/// Temporal self-convergence: a fixed space, dyadically refined step counts,
/// every resolution of one sample driven by one Wiener path, errors against
/// the reference step count on the coarse grids.
struct TemporalRateRequest {
  int elements = 64;
  std::vector<int64_t> step_list = {64, 128, 256, 512, 1024};
  int64_t reference_steps = 8192;
};

[[nodiscard]] SweepResult temporal_rate(const ExperimentConfig& config,
                                        const TemporalRateRequest& request);

/// Spatial self-convergence: a fixed step count, dyadically refined nested
/// meshes, errors against the reference mesh under the same path. When
/// localize is set, level i uses the threshold
///   rho(h) = viscosity / (36 * embedding_constant^2 * horizon) * ln(h^-beta)
/// and the aggregates carry indicator-weighted errors and P(omega).
struct SpatialRateRequest {
  int64_t steps = 4096;
  std::vector<int> element_list = {8, 16, 32, 64};
  int reference_elements = 256;
  bool localize = false;
  double beta = 0.5;
  double embedding_constant = 1.0;
};

[[nodiscard]] SweepResult spatial_rate(const ExperimentConfig& config,
                                       const SpatialRateRequest& request);

/// Moment statistics of the discrete solution itself (no reference):
/// E[sup_n ||u||^p] for p in {2,4,8} and E[dt * sum_n ||d2 u||^2], one
/// report per step count, all resolutions of a sample sharing one path.
struct StabilityRequest {
  int elements = 64;
  std::vector<int64_t> step_list = {512, 1024};
};

struct MomentReport {
  int64_t steps = 0;
  double dt = 0.0;
  std::vector<double> exponents;
  std::vector<double> means;
  std::vector<double> ses;
  double h2_time_mean = 0.0;
  double h2_time_se = 0.0;
  std::vector<double> raw_sup;  // per-path sup_n of the L2 norm
  std::vector<double> raw_h2;   // per-path dt * sum ||d2 u||^2
};

[[nodiscard]] std::vector<MomentReport> stability_stats(const ExperimentConfig& config,
                                                        const StabilityRequest& request);

/// Time-regularity quotients E||d^m (u(s+gap) - u(s))||^(2q) / gap^q of a
/// single-resolution solution, maximized over a spread of start times, one
/// value per dyadic gap.
struct HolderRequest {
  int elements = 64;
  int64_t steps = 2048;
  std::vector<int> derivative_list = {0, 1, 2};
  std::vector<double> q_list = {0.5, 1.0};
  std::vector<int> gap_list = {1, 2, 4, 8};  // in steps
  int offsets = 16;
};

struct HolderQuotient {
  int derivative = 0;
  double q = 0.5;
  std::vector<double> per_gap;
  double max_quotient = 0.0;
};

[[nodiscard]] std::vector<HolderQuotient> holder_quotients(const ExperimentConfig& config,
                                                           const HolderRequest& request);

/// Monte Carlo mean of exp(kappa*||u(T)||^2 + (kappa/2)*viscosity*dt*sum_n
/// ||d2 u^n||^2). Overflow of the exponent is reported as ExponentOverflow
/// rather than returning infinity: it diagnoses kappa above the regime the
/// moment bound covers.
struct ExpMomentRequest {
  int elements = 64;
  int64_t steps = 256;
  double kappa = 0.01;
};

struct ExpMomentReport {
  double mean = 1.0;
  double se = 0.0;
  int64_t samples = 0;
  double kappa = 0.0;
  std::vector<double> raw;  // per-path exp(...) values
};

class ExponentOverflow : public std::runtime_error {
 public:
  ExponentOverflow(double argument, double kappa);
  double argument;
  double kappa;
};

[[nodiscard]] ExpMomentReport exp_moment_stats(const ExperimentConfig& config,
                                               const ExpMomentRequest& request);

/// Largest kappa for which the exponential moment bound applies to the
/// model on a domain of the given length: 1/(16*L0^2) with L0 the uniform
/// L2 bound of the mapped diffusion. +infinity for the zero model, 0 for
/// unbounded models.
[[nodiscard]] double exp_moment_threshold(const DiffusionModel& model, double length);

/// Re-derives the dyadic coupling identity on one path: for every step
/// count, each coarse increment must equal the sum of its reference-level
/// children to 1e-12. Throws std::logic_error on violation; run before
/// each coupled sweep.
void verify_coupling(const WienerPath& path, std::span<const int64_t> step_counts,
                     int64_t reference_steps);

}  // namespace sks
