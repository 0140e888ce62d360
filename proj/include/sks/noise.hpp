#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sks/assembly.hpp"
#include "sks/spline.hpp"

namespace sks {

/// One sampled Brownian driver on [0, horizon], stored at its finest dyadic
/// resolution (2^max_level increments). Coarser increment sequences are
/// produced by pairwise summation, so every refinement level describes the
/// same underlying path; running a scheme with steps M and 2M against the
/// same WienerPath couples them through that path.
class WienerPath {
 public:
  static constexpr int kMaxLevel = 24;

  /// Samples the finest increments i.i.d. N(0, horizon / 2^max_level).
  WienerPath(uint64_t seed, double horizon, int max_level);

  [[nodiscard]] uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }
  [[nodiscard]] int max_level() const noexcept { return max_level_; }
  [[nodiscard]] const std::vector<double>& finest() const noexcept { return finest_; }

  /// Increments over a uniform grid with `steps` intervals. steps must be a
  /// power of two not exceeding 2^max_level; each value is the exact sum of
  /// its 2^max_level/steps children.
  [[nodiscard]] std::vector<double> increments(int64_t steps) const;

  /// Terminal value W(horizon).
  [[nodiscard]] double total() const noexcept;

 private:
  uint64_t seed_;
  double horizon_;
  int max_level_;
  std::vector<double> finest_;
};

/// Pointwise diffusion coefficient b applied as a Nemytskii map u -> b(u).
///
/// The bounded kinds satisfy |b| <= 1 pointwise, so the L2 size of the
/// mapped function is at most sqrt(domain length) regardless of the state;
/// the linear kind b(u) = lambda*u is unbounded but Lipschitz.
struct DiffusionModel {
  enum class Kind { zero, sine, cosine, rational, linear };

  Kind kind = Kind::zero;
  double lambda = 0.0;  // slope of the linear kind, ignored otherwise

  static DiffusionModel zero() { return {Kind::zero, 0.0}; }
  static DiffusionModel sine() { return {Kind::sine, 0.0}; }
  static DiffusionModel cosine() { return {Kind::cosine, 0.0}; }
  static DiffusionModel rational() { return {Kind::rational, 0.0}; }
  static DiffusionModel linear(double slope) { return {Kind::linear, slope}; }

  /// Parses "zero" | "sin" | "cos" | "rational" | "linear"; the linear slope
  /// is configured separately. Throws std::invalid_argument on other names.
  static DiffusionModel parse(std::string_view name, double lambda_if_linear);

  [[nodiscard]] std::string name() const;

  /// Pointwise value b(u).
  [[nodiscard]] double operator()(double u) const noexcept;

  /// True when |b| <= 1 pointwise (also true for the zero kind).
  [[nodiscard]] bool bounded() const noexcept { return kind != Kind::linear; }

  /// Uniform L2 bound of the mapped function on a domain of the given
  /// length: 0 for zero, sqrt(length) for the bounded kinds, +inf linear.
  [[nodiscard]] double l2_bound(double domain_length) const noexcept;

  /// Lipschitz constant of b.
  [[nodiscard]] double lipschitz() const noexcept;
};

/// Load vector of the mean-corrected diffusion image: with v the spline
/// given by `coeffs` and m the domain mean of b(v), fills `load_out` with
/// (b(v) - m, B_i). `quad_work` must hold size()*quadrature().size()
/// doubles.
void diffusion_load(const SplineSpace& space, const DiffusionModel& model,
                    std::span<const double> coeffs, std::span<double> quad_work,
                    std::span<double> load_out);

/// Coefficients of the L2 projection of the mean-corrected diffusion image
/// b(v) - mean(b(v)). The result has zero mean.
[[nodiscard]] Coefficients apply_diffusion(const SplineSpace& space, const Operators& ops,
                                           const DiffusionModel& model,
                                           std::span<const double> coeffs);

/// Empirical Lipschitz quotient: max over sampled coefficient pairs (u, v)
/// of ||b(u)-b(v)|| / ||u-v|| in L2. Never exceeds model.lipschitz() beyond
/// roundoff; equals lambda exactly for the linear kind.
[[nodiscard]] double lipschitz_probe(const SplineSpace& space, const DiffusionModel& model,
                                     int pairs, uint64_t seed);

}  // namespace sks
