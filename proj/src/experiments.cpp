#include "sks/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <thread>
#include <utility>

#include "sks/rng.hpp"

namespace sks {

namespace {

// Experiment tags feeding derive_seed(master, tag, path); distinct values
// keep the path streams of different experiments independent.
constexpr uint64_t kTemporalTag = 0x74696d65;   // "time"
constexpr uint64_t kSpatialTag = 0x73706163;    // "spac"
constexpr uint64_t kStabilityTag = 0x73746162;  // "stab"
constexpr uint64_t kHolderTag = 0x686f6c64;     // "hold"
constexpr uint64_t kExpMomentTag = 0x6578706d;  // "expm"

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_config(const ExperimentConfig& config) {
  if (!(config.length > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (!(config.viscosity > 0.0)) throw std::invalid_argument("viscosity must be positive");
  if (!(config.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!std::isfinite(config.u0_amplitude))
    throw std::invalid_argument("initial amplitude must be finite");
  if (config.mc_samples < 1) throw std::invalid_argument("sample count must be at least one");
  if (config.workers < 1) throw std::invalid_argument("worker count must be at least one");
  if (!(config.newton_tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (config.newton_max_iter < 1)
    throw std::invalid_argument("solver iteration budget must be at least one");
}

SchemeParams scheme_params(const ExperimentConfig& config, int64_t steps) {
  SchemeParams params;
  params.viscosity = config.viscosity;
  params.horizon = config.horizon;
  params.steps = steps;
  params.newton_tol = config.newton_tol;
  params.newton_max_iter = config.newton_max_iter;
  return params;
}

std::function<double(double)> initial_condition(const ExperimentConfig& config) {
  const double amplitude = config.u0_amplitude;
  const double frequency = 2.0 * std::numbers::pi / config.length;
  return [amplitude, frequency](double x) { return amplitude * std::sin(frequency * x); };
}

int dyadic_level(int64_t steps, const char* what) {
  if (steps < 1 || (steps & (steps - 1)) != 0)
    throw std::invalid_argument(std::string(what) + " must be a power of two, got " +
                                std::to_string(steps));
  int level = 0;
  while ((int64_t{1} << level) < steps) ++level;
  return level;
}

// Runs fn(0..count-1), spreading paths over up to `workers` threads. Each
// index runs exactly once; a failure does not cancel the others, and the
// failure with the lowest index is rethrown so errors are deterministic.
void for_each_path(int workers, int64_t count, const std::function<void(int64_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (int64_t p = 0; p < count; ++p) fn(p);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  std::atomic<int64_t> next{0};
  const int threads = static_cast<int>(std::min<int64_t>(workers, count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int64_t p = next.fetch_add(1); p < count; p = next.fetch_add(1)) {
        try {
          fn(p);
        } catch (...) {
          errors[static_cast<size_t>(p)] = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

// Mean and standard error of the mean, summed in index order so aggregates
// are bit-reproducible regardless of the worker count.
std::pair<double, double> mean_and_se(std::span<const double> values) {
  const size_t n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

void check_same_grid(const Trajectory& coarse, const Trajectory& reference) {
  if (coarse.states.empty() || reference.states.empty())
    throw std::invalid_argument("error norms need non-empty trajectories");
  const double scale = std::max(1.0, std::fabs(reference.horizon));
  if (std::fabs(coarse.horizon - reference.horizon) > 1e-12 * scale)
    throw std::invalid_argument("trajectories cover different horizons");
}

}  // namespace

ExperimentDivergence::ExperimentDivergence(const NewtonDivergence& cause,
                                           std::string_view experiment_, int64_t steps_,
                                           int elements_, uint64_t path_seed_, int64_t path_index_)
    : NewtonDivergence(cause),
      experiment(experiment_),
      steps(steps_),
      elements(elements_),
      path_seed(path_seed_),
      path_index(path_index_) {
  detail_ = std::string(cause.what()) + " [" + experiment + ": steps=" + std::to_string(steps) +
            ", elements=" + std::to_string(elements) + ", path " + std::to_string(path_index) +
            ", seed " + std::to_string(path_seed) + "]";
}

PathNorms error_norms(const Trajectory& coarse, const Trajectory& reference, const Operators& ops,
                      double viscosity) {
  check_same_grid(coarse, reference);
  if (coarse.states.front().size() != reference.states.front().size())
    throw std::invalid_argument("trajectories live in different spaces; embed through a table");
  const int64_t coarse_steps = static_cast<int64_t>(coarse.states.size()) - 1;
  const int64_t reference_steps = static_cast<int64_t>(reference.states.size()) - 1;
  if (coarse_steps < 1 || reference_steps < coarse_steps || reference_steps % coarse_steps != 0)
    throw std::invalid_argument("reference steps must be a positive multiple of coarse steps");
  const int64_t stride = reference_steps / coarse_steps;
  const size_t dim = coarse.states.front().size();

  PathNorms out;
  std::vector<double> diff(dim);
  double h2 = 0.0;
  for (int64_t n = 1; n <= coarse_steps; ++n) {
    const Coefficients& c = coarse.states[static_cast<size_t>(n)];
    const Coefficients& r = reference.states[static_cast<size_t>(n * stride)];
    for (size_t j = 0; j < dim; ++j) diff[j] = c[j] - r[j];
    out.sup_l2 = std::max(out.sup_l2, ops.l2_norm(diff));
    const double h2n = ops.h2_seminorm(diff);
    h2 += h2n * h2n;
  }
  out.h2_sum = viscosity * coarse.dt * h2;
  for (const Coefficients& r : reference.states) {
    const double norm = ops.l2_norm(r);
    out.ref_sup_sq = std::max(out.ref_sup_sq, norm * norm);
  }
  return out;
}

CrossSpaceTable::CrossSpaceTable(const SplineSpace& coarse, const SplineSpace& fine)
    : coarse_(&coarse), fine_(&fine) {
  if (std::fabs(coarse.length() - fine.length()) > 1e-12 * fine.length())
    throw std::invalid_argument("spaces must cover the same interval");
  if (fine.size() < coarse.size() || fine.size() % coarse.size() != 0)
    throw std::invalid_argument("fine mesh must be a nested refinement of the coarse mesh");
  const int nq = fine.quadrature().size();
  const int order = coarse.order();
  nodes_ = fine.size() * nq;
  index_.resize(static_cast<size_t>(nodes_) * static_cast<size_t>(order));
  for (auto& v : values_) v.resize(index_.size());
  for (int e = 0; e < fine.size(); ++e)
    for (int g = 0; g < nq; ++g) {
      const size_t base = (static_cast<size_t>(e) * nq + g) * static_cast<size_t>(order);
      const double x = fine.quad_point(e, g);
      for (int d = 0; d < 3; ++d) {
        const BasisEval eval = coarse.basis(x, d);
        for (int j = 0; j < eval.count; ++j) {
          index_[base + static_cast<size_t>(j)] = eval.index[static_cast<size_t>(j)];
          values_[d][base + static_cast<size_t>(j)] = eval.value[static_cast<size_t>(j)];
        }
      }
    }
}

void CrossSpaceTable::eval(std::span<const double> coarse_coeffs, int deriv,
                           std::span<double> out) const {
  if (deriv < 0 || deriv > 2) throw std::invalid_argument("derivative order must be 0, 1, or 2");
  if (coarse_coeffs.size() != static_cast<size_t>(coarse_->size()))
    throw std::invalid_argument("coefficient count does not match the coarse space");
  if (out.size() != static_cast<size_t>(nodes_))
    throw std::invalid_argument("output size does not match the fine quadrature grid");
  const int order = coarse_->order();
  const std::vector<double>& vals = values_[deriv];
  for (int node = 0; node < nodes_; ++node) {
    const size_t base = static_cast<size_t>(node) * static_cast<size_t>(order);
    double s = 0.0;
    for (int j = 0; j < order; ++j) s += vals[base + j] * coarse_coeffs[index_[base + j]];
    out[static_cast<size_t>(node)] = s;
  }
}

PathNorms error_norms(const Trajectory& coarse, const Trajectory& reference,
                      const CrossSpaceTable& table, const Operators& reference_ops,
                      double viscosity) {
  check_same_grid(coarse, reference);
  if (coarse.states.size() != reference.states.size())
    throw std::invalid_argument("cross-space norms need a shared time grid");
  if (coarse.states.front().size() != static_cast<size_t>(table.coarse().size()) ||
      reference.states.front().size() != static_cast<size_t>(table.fine().size()))
    throw std::invalid_argument("trajectories do not match the table's spaces");
  const SplineSpace& fine = table.fine();
  const int nq = fine.quadrature().size();
  const size_t nodes = static_cast<size_t>(fine.size()) * static_cast<size_t>(nq);
  const int64_t steps = static_cast<int64_t>(coarse.states.size()) - 1;
  if (steps < 1) throw std::invalid_argument("trajectories need at least one step");

  // The fine rule integrates squares of either space's piecewise
  // polynomials exactly, so these sums are the true L2/H2 norms of the
  // function difference.
  std::vector<double> vc(nodes);
  std::vector<double> vr(nodes);
  const auto quad_sq = [&](int deriv, const Coefficients& c, const Coefficients& r) {
    table.eval(c, deriv, vc);
    eval_at_quad(fine, r, deriv, vr);
    double total = 0.0;
    size_t node = 0;
    for (int e = 0; e < fine.size(); ++e)
      for (int g = 0; g < nq; ++g, ++node) {
        const double d = vc[node] - vr[node];
        total += fine.quad_weight(g) * d * d;
      }
    return total;
  };

  PathNorms out;
  double h2 = 0.0;
  for (int64_t n = 1; n <= steps; ++n) {
    const Coefficients& c = coarse.states[static_cast<size_t>(n)];
    const Coefficients& r = reference.states[static_cast<size_t>(n)];
    out.sup_l2 = std::max(out.sup_l2, std::sqrt(quad_sq(0, c, r)));
    h2 += quad_sq(2, c, r);
  }
  out.h2_sum = viscosity * coarse.dt * h2;
  for (const Coefficients& r : reference.states) {
    const double norm = reference_ops.l2_norm(r);
    out.ref_sup_sq = std::max(out.ref_sup_sq, norm * norm);
  }
  return out;
}

double SupMoment::normalized() const {
  return mean > 0.0 ? std::pow(mean, 1.0 / exponent) : 0.0;
}

double SupMoment::normalized_se() const {
  if (mean <= 0.0) return 0.0;
  return std::pow(mean, 1.0 / exponent - 1.0) * se / exponent;
}

double SupMoment::loc_normalized() const {
  return loc_mean > 0.0 ? std::pow(loc_mean, 1.0 / exponent) : 0.0;
}

double ErrorAggregate::h2_error() const { return std::sqrt(std::max(0.0, h2_mean)); }

const SupMoment& ErrorAggregate::moment(double exponent) const {
  for (const SupMoment& m : sup_moments)
    if (std::fabs(m.exponent - exponent) <= 1e-9) return m;
  throw std::out_of_range("no sup moment with exponent " + std::to_string(exponent));
}

std::vector<double> sup_error_exponents(std::span<const double> q_list) {
  std::vector<double> exponents;
  exponents.reserve(q_list.size() + 1);
  for (double q : q_list) {
    if (!(q > 0.0 && q < 0.99))
      throw std::invalid_argument(
          "moment parameter q must lie in (0, 0.99); sup moments of the error are only "
          "controlled for sub-unit powers");
    exponents.push_back(2.0 * q);
  }
  exponents.push_back(2.0);  // bootstrap moment, exponent 4q at q = 1/2
  std::sort(exponents.begin(), exponents.end());
  exponents.erase(std::unique(exponents.begin(), exponents.end(),
                              [](double a, double b) { return std::fabs(a - b) <= 1e-12; }),
                  exponents.end());
  return exponents;
}

ErrorAggregate aggregate_norms(std::span<const PathNorms> per_path,
                               std::span<const double> exponents, double rho, double abscissa) {
  if (per_path.empty()) throw std::invalid_argument("aggregation needs at least one path");
  const size_t n = per_path.size();
  ErrorAggregate out;
  out.samples = static_cast<int64_t>(n);
  out.abscissa = abscissa;
  out.rho = rho;

  std::vector<double> indicator(n);
  double hits = 0.0;
  for (size_t i = 0; i < n; ++i) {
    indicator[i] = per_path[i].ref_sup_sq <= rho ? 1.0 : 0.0;
    hits += indicator[i];
  }
  out.omega_probability = hits / static_cast<double>(n);

  std::vector<double> values(n);
  for (double p : exponents) {
    SupMoment moment;
    moment.exponent = p;
    for (size_t i = 0; i < n; ++i) values[i] = std::pow(per_path[i].sup_l2, p);
    std::tie(moment.mean, moment.se) = mean_and_se(values);
    for (size_t i = 0; i < n; ++i) values[i] *= indicator[i];
    std::tie(moment.loc_mean, moment.loc_se) = mean_and_se(values);
    out.sup_moments.push_back(moment);
  }
  for (size_t i = 0; i < n; ++i) values[i] = per_path[i].h2_sum;
  std::tie(out.h2_mean, out.h2_se) = mean_and_se(values);
  for (size_t i = 0; i < n; ++i) values[i] *= indicator[i];
  std::tie(out.loc_h2_mean, out.loc_h2_se) = mean_and_se(values);
  return out;
}

RateReport fit_rate(std::span<const double> abscissae, std::span<const double> errors) {
  if (abscissae.size() != errors.size())
    throw std::invalid_argument("rate fit needs one error per abscissa");
  const size_t n = abscissae.size();
  if (n < 3) throw std::invalid_argument("rate fit needs at least three levels");
  for (size_t i = 0; i < n; ++i) {
    if (!(abscissae[i] > 0.0)) throw std::invalid_argument("abscissae must be positive");
    if (!(errors[i] > 0.0) || !std::isfinite(errors[i]))
      throw std::invalid_argument("rate fit needs positive finite errors");
    if (i > 0 && std::fabs(abscissae[i] / abscissae[i - 1] - 0.5) > 1e-9)
      throw std::invalid_argument("abscissae must halve between levels");
  }

  RateReport report;
  report.abscissae.assign(abscissae.begin(), abscissae.end());
  report.errors.assign(errors.begin(), errors.end());
  std::vector<double> x(n);
  std::vector<double> y(n);
  double xbar = 0.0;
  double ybar = 0.0;
  for (size_t i = 0; i < n; ++i) {
    x[i] = std::log(abscissae[i]);
    y[i] = std::log(errors[i]);
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  report.slope = sxy / sxx;
  report.intercept = ybar - report.slope * xbar;
  double rss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - (report.intercept + report.slope * x[i]);
    rss += r * r;
  }
  report.fit_residual = std::sqrt(rss / static_cast<double>(n - 2));
  report.half_width = 2.0 * report.fit_residual / std::sqrt(sxx);
  return report;
}

std::vector<double> SweepResult::abscissae() const {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const ErrorAggregate& level : levels) out.push_back(level.abscissa);
  return out;
}

std::vector<double> SweepResult::sup_errors(double exponent) const {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const ErrorAggregate& level : levels) out.push_back(level.moment(exponent).normalized());
  return out;
}

std::vector<double> SweepResult::h2_errors() const {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const ErrorAggregate& level : levels) out.push_back(level.h2_error());
  return out;
}

std::vector<double> SweepResult::omega_probabilities() const {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const ErrorAggregate& level : levels) out.push_back(level.omega_probability);
  return out;
}

SweepResult temporal_rate(const ExperimentConfig& config, const TemporalRateRequest& request) {
  validate_config(config);
  if (request.step_list.size() < 3)
    throw std::invalid_argument("temporal sweep needs at least three step counts");
  for (size_t i = 0; i < request.step_list.size(); ++i) {
    dyadic_level(request.step_list[i], "step count");
    if (i > 0 && request.step_list[i] <= request.step_list[i - 1])
      throw std::invalid_argument("step counts must increase strictly");
  }
  const int reference_level = dyadic_level(request.reference_steps, "reference step count");
  if (request.reference_steps < 8 * request.step_list.back())
    throw std::invalid_argument(
        "reference steps must be at least eight times the finest sweep level");

  const SplineSpace space(config.length, request.elements, config.order);
  const Operators ops(space);
  const Coefficients init = initial_state(space, ops, initial_condition(config));
  const std::vector<double> exponents = sup_error_exponents(config.q_list);

  verify_coupling(WienerPath(derive_seed(config.seed, kTemporalTag, 0), config.horizon,
                             reference_level),
                  request.step_list, request.reference_steps);

  const size_t levels = request.step_list.size();
  std::vector<std::vector<PathNorms>> norms(
      levels, std::vector<PathNorms>(static_cast<size_t>(config.mc_samples)));
  for_each_path(config.workers, config.mc_samples, [&](int64_t p) {
    const uint64_t path_seed = derive_seed(config.seed, kTemporalTag, static_cast<uint64_t>(p));
    const WienerPath path(path_seed, config.horizon, reference_level);
    int64_t running = request.reference_steps;
    try {
      Stepper reference_stepper(space, ops, config.model,
                                scheme_params(config, request.reference_steps));
      const Trajectory reference = reference_stepper.run(init, path);
      for (size_t i = 0; i < levels; ++i) {
        running = request.step_list[i];
        Stepper stepper(space, ops, config.model, scheme_params(config, running));
        const Trajectory coarse = stepper.run(init, path);
        norms[i][static_cast<size_t>(p)] = error_norms(coarse, reference, ops, config.viscosity);
      }
    } catch (const NewtonDivergence& cause) {
      throw ExperimentDivergence(cause, "temporal", running, request.elements, path_seed, p);
    }
  });

  SweepResult result;
  result.levels.reserve(levels);
  for (size_t i = 0; i < levels; ++i)
    result.levels.push_back(aggregate_norms(norms[i], exponents, kInf,
                                            config.horizon /
                                                static_cast<double>(request.step_list[i])));
  result.raw = std::move(norms);
  return result;
}

SweepResult spatial_rate(const ExperimentConfig& config, const SpatialRateRequest& request) {
  validate_config(config);
  if (request.element_list.size() < 3)
    throw std::invalid_argument("spatial sweep needs at least three mesh levels");
  for (size_t i = 1; i < request.element_list.size(); ++i)
    if (request.element_list[i] != 2 * request.element_list[i - 1])
      throw std::invalid_argument("element counts must double between levels");
  const int finest = request.element_list.back();
  if (request.reference_elements < 4 * finest ||
      request.reference_elements % finest != 0)
    throw std::invalid_argument(
        "reference mesh must be a nested refinement at least four times the finest level");
  const int level = dyadic_level(request.steps, "step count");
  if (request.localize && !(request.beta > 0.0))
    throw std::invalid_argument("localization exponent beta must be positive");
  if (request.localize && !(request.embedding_constant > 0.0))
    throw std::invalid_argument("embedding constant must be positive");

  const size_t levels = request.element_list.size();
  const SplineSpace reference_space(config.length, request.reference_elements, config.order);
  const Operators reference_ops(reference_space);
  const Coefficients reference_init =
      initial_state(reference_space, reference_ops, initial_condition(config));

  std::vector<std::unique_ptr<SplineSpace>> spaces;
  std::vector<std::unique_ptr<Operators>> ops;
  std::vector<std::unique_ptr<CrossSpaceTable>> tables;
  std::vector<Coefficients> inits;
  std::vector<double> rho(levels, kInf);
  for (size_t i = 0; i < levels; ++i) {
    spaces.push_back(
        std::make_unique<SplineSpace>(config.length, request.element_list[i], config.order));
    ops.push_back(std::make_unique<Operators>(*spaces[i]));
    tables.push_back(std::make_unique<CrossSpaceTable>(*spaces[i], reference_space));
    inits.push_back(initial_state(*spaces[i], *ops[i], initial_condition(config)));
    if (request.localize) {
      const double ce = request.embedding_constant;
      rho[i] = config.viscosity / (36.0 * ce * ce * config.horizon) *
               (-request.beta * std::log(spaces[i]->mesh_size()));
    }
  }
  const std::vector<double> exponents = sup_error_exponents(config.q_list);

  std::vector<std::vector<PathNorms>> norms(
      levels, std::vector<PathNorms>(static_cast<size_t>(config.mc_samples)));
  for_each_path(config.workers, config.mc_samples, [&](int64_t p) {
    const uint64_t path_seed = derive_seed(config.seed, kSpatialTag, static_cast<uint64_t>(p));
    const WienerPath path(path_seed, config.horizon, level);
    int elements = request.reference_elements;
    try {
      Stepper reference_stepper(reference_space, reference_ops, config.model,
                                scheme_params(config, request.steps));
      const Trajectory reference = reference_stepper.run(reference_init, path);
      for (size_t i = 0; i < levels; ++i) {
        elements = request.element_list[i];
        Stepper stepper(*spaces[i], *ops[i], config.model, scheme_params(config, request.steps));
        const Trajectory coarse = stepper.run(inits[i], path);
        norms[i][static_cast<size_t>(p)] =
            error_norms(coarse, reference, *tables[i], reference_ops, config.viscosity);
      }
    } catch (const NewtonDivergence& cause) {
      throw ExperimentDivergence(cause, "spatial", request.steps, elements, path_seed, p);
    }
  });

  SweepResult result;
  result.levels.reserve(levels);
  for (size_t i = 0; i < levels; ++i)
    result.levels.push_back(
        aggregate_norms(norms[i], exponents, rho[i], spaces[i]->mesh_size()));
  result.raw = std::move(norms);
  return result;
}

std::vector<MomentReport> stability_stats(const ExperimentConfig& config,
                                          const StabilityRequest& request) {
  validate_config(config);
  if (request.step_list.empty())
    throw std::invalid_argument("stability sweep needs at least one step count");
  for (size_t i = 0; i < request.step_list.size(); ++i) {
    dyadic_level(request.step_list[i], "step count");
    if (i > 0 && request.step_list[i] <= request.step_list[i - 1])
      throw std::invalid_argument("step counts must increase strictly");
  }
  const int max_level = dyadic_level(request.step_list.back(), "step count");
  verify_coupling(
      WienerPath(derive_seed(config.seed, kStabilityTag, 0), config.horizon, max_level),
      request.step_list, request.step_list.back());

  const SplineSpace space(config.length, request.elements, config.order);
  const Operators ops(space);
  const Coefficients init = initial_state(space, ops, initial_condition(config));

  const size_t levels = request.step_list.size();
  const size_t samples = static_cast<size_t>(config.mc_samples);
  std::vector<std::vector<double>> sup_norm(levels, std::vector<double>(samples));
  std::vector<std::vector<double>> h2_time(levels, std::vector<double>(samples));
  for_each_path(config.workers, config.mc_samples, [&](int64_t p) {
    const uint64_t path_seed = derive_seed(config.seed, kStabilityTag, static_cast<uint64_t>(p));
    const WienerPath path(path_seed, config.horizon, max_level);
    int64_t running = request.step_list.back();
    try {
      for (size_t i = 0; i < levels; ++i) {
        running = request.step_list[i];
        Stepper stepper(space, ops, config.model, scheme_params(config, running));
        const Trajectory traj = stepper.run(init, path);
        double sup = 0.0;
        double h2 = 0.0;
        for (size_t n = 0; n < traj.states.size(); ++n) {
          sup = std::max(sup, ops.l2_norm(traj.states[n]));
          if (n >= 1) {
            const double h2n = ops.h2_seminorm(traj.states[n]);
            h2 += h2n * h2n;
          }
        }
        sup_norm[i][static_cast<size_t>(p)] = sup;
        h2_time[i][static_cast<size_t>(p)] = traj.dt * h2;
      }
    } catch (const NewtonDivergence& cause) {
      throw ExperimentDivergence(cause, "stability", running, request.elements, path_seed, p);
    }
  });

  std::vector<MomentReport> reports;
  reports.reserve(levels);
  std::vector<double> values(samples);
  for (size_t i = 0; i < levels; ++i) {
    MomentReport report;
    report.steps = request.step_list[i];
    report.dt = config.horizon / static_cast<double>(request.step_list[i]);
    report.exponents = {2.0, 4.0, 8.0};
    for (double p : report.exponents) {
      for (size_t s = 0; s < samples; ++s) values[s] = std::pow(sup_norm[i][s], p);
      const auto [mean, se] = mean_and_se(values);
      report.means.push_back(mean);
      report.ses.push_back(se);
    }
    std::tie(report.h2_time_mean, report.h2_time_se) = mean_and_se(h2_time[i]);
    report.raw_sup = std::move(sup_norm[i]);
    report.raw_h2 = std::move(h2_time[i]);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<HolderQuotient> holder_quotients(const ExperimentConfig& config,
                                             const HolderRequest& request) {
  validate_config(config);
  const int level = dyadic_level(request.steps, "step count");
  if (request.derivative_list.empty())
    throw std::invalid_argument("derivative list must not be empty");
  for (int m : request.derivative_list)
    if (m < 0 || m > 2) throw std::invalid_argument("derivative order must be 0, 1, or 2");
  if (request.q_list.empty()) throw std::invalid_argument("q list must not be empty");
  for (double q : request.q_list)
    if (!(q > 0.0 && q <= 2.0))
      throw std::invalid_argument("regularity moment q must lie in (0, 2]");
  if (request.gap_list.empty()) throw std::invalid_argument("gap list must not be empty");
  for (size_t i = 0; i < request.gap_list.size(); ++i) {
    if (request.gap_list[i] < 1 || request.gap_list[i] > request.steps)
      throw std::invalid_argument("gaps must lie between one step and the horizon");
    if (i > 0 && request.gap_list[i] <= request.gap_list[i - 1])
      throw std::invalid_argument("gaps must increase strictly");
  }
  if (request.offsets < 1) throw std::invalid_argument("offset count must be at least one");

  const SplineSpace space(config.length, request.elements, config.order);
  const Operators ops(space);
  const Coefficients init = initial_state(space, ops, initial_condition(config));

  const size_t nd = request.derivative_list.size();
  const size_t ng = request.gap_list.size();
  const size_t no = static_cast<size_t>(request.offsets);
  const size_t samples = static_cast<size_t>(config.mc_samples);

  // Per-path squared norms of the increments, indexed (derivative, gap,
  // offset); moment powers are applied during the ordered reduction.
  std::vector<std::vector<double>> norm_sq(samples);
  for_each_path(config.workers, config.mc_samples, [&](int64_t p) {
    const uint64_t path_seed = derive_seed(config.seed, kHolderTag, static_cast<uint64_t>(p));
    const WienerPath path(path_seed, config.horizon, level);
    try {
      Stepper stepper(space, ops, config.model, scheme_params(config, request.steps));
      const Trajectory traj = stepper.run(init, path);
      std::vector<double>& out = norm_sq[static_cast<size_t>(p)];
      out.resize(nd * ng * no);
      std::vector<double> diff(static_cast<size_t>(space.size()));
      for (size_t gi = 0; gi < ng; ++gi) {
        const int64_t gap = request.gap_list[gi];
        const int64_t last_start = request.steps - gap;
        for (size_t oi = 0; oi < no; ++oi) {
          const int64_t start =
              no == 1 ? 0
                      : static_cast<int64_t>(std::llround(static_cast<double>(oi) *
                                                          static_cast<double>(last_start) /
                                                          static_cast<double>(no - 1)));
          const Coefficients& a = traj.states[static_cast<size_t>(start)];
          const Coefficients& b = traj.states[static_cast<size_t>(start + gap)];
          for (size_t j = 0; j < diff.size(); ++j) diff[j] = b[j] - a[j];
          for (size_t di = 0; di < nd; ++di) {
            const int m = request.derivative_list[di];
            const double norm = m == 0   ? ops.l2_norm(diff)
                                : m == 1 ? ops.h1_seminorm(diff)
                                         : ops.h2_seminorm(diff);
            out[(di * ng + gi) * no + oi] = norm * norm;
          }
        }
      }
    } catch (const NewtonDivergence& cause) {
      throw ExperimentDivergence(cause, "holder", request.steps, request.elements, path_seed, p);
    }
  });

  const double dt = config.horizon / static_cast<double>(request.steps);
  std::vector<HolderQuotient> out;
  out.reserve(nd * request.q_list.size());
  for (size_t di = 0; di < nd; ++di)
    for (double q : request.q_list) {
      HolderQuotient quotient;
      quotient.derivative = request.derivative_list[di];
      quotient.q = q;
      for (size_t gi = 0; gi < ng; ++gi) {
        double best = 0.0;
        for (size_t oi = 0; oi < no; ++oi) {
          double sum = 0.0;
          for (size_t s = 0; s < samples; ++s)
            sum += std::pow(norm_sq[s][(di * ng + gi) * no + oi], q);
          best = std::max(best, sum / static_cast<double>(samples));
        }
        const double span = static_cast<double>(request.gap_list[gi]) * dt;
        quotient.per_gap.push_back(best / std::pow(span, q));
      }
      quotient.max_quotient =
          *std::max_element(quotient.per_gap.begin(), quotient.per_gap.end());
      out.push_back(std::move(quotient));
    }
  return out;
}

ExponentOverflow::ExponentOverflow(double argument_, double kappa_)
    : std::runtime_error("exponential moment overflow: exponent " + std::to_string(argument_) +
                         " at kappa " + std::to_string(kappa_) +
                         "; reduce kappa below the moment threshold"),
      argument(argument_),
      kappa(kappa_) {}

ExpMomentReport exp_moment_stats(const ExperimentConfig& config, const ExpMomentRequest& request) {
  validate_config(config);
  const int level = dyadic_level(request.steps, "step count");
  if (!(request.kappa >= 0.0) || !std::isfinite(request.kappa))
    throw std::invalid_argument("kappa must be finite and nonnegative");

  const SplineSpace space(config.length, request.elements, config.order);
  const Operators ops(space);
  const Coefficients init = initial_state(space, ops, initial_condition(config));

  std::vector<double> values(static_cast<size_t>(config.mc_samples));
  for_each_path(config.workers, config.mc_samples, [&](int64_t p) {
    const uint64_t path_seed = derive_seed(config.seed, kExpMomentTag, static_cast<uint64_t>(p));
    const WienerPath path(path_seed, config.horizon, level);
    try {
      Stepper stepper(space, ops, config.model, scheme_params(config, request.steps));
      const Trajectory traj = stepper.run(init, path);
      double h2 = 0.0;
      for (size_t n = 1; n < traj.states.size(); ++n) {
        const double h2n = ops.h2_seminorm(traj.states[n]);
        h2 += h2n * h2n;
      }
      const double terminal = ops.l2_norm(traj.states.back());
      const double argument = request.kappa * terminal * terminal +
                              0.5 * request.kappa * config.viscosity * traj.dt * h2;
      if (argument > 700.0) throw ExponentOverflow(argument, request.kappa);
      values[static_cast<size_t>(p)] = std::exp(argument);
    } catch (const NewtonDivergence& cause) {
      throw ExperimentDivergence(cause, "exp-moment", request.steps, request.elements, path_seed,
                                 p);
    }
  });

  ExpMomentReport report;
  report.samples = config.mc_samples;
  report.kappa = request.kappa;
  std::tie(report.mean, report.se) = mean_and_se(values);
  report.raw = std::move(values);
  return report;
}

double exp_moment_threshold(const DiffusionModel& model, double length) {
  const double bound = model.l2_bound(length);
  if (bound == 0.0) return kInf;
  if (std::isinf(bound)) return 0.0;
  return 1.0 / (16.0 * bound * bound);
}

void verify_coupling(const WienerPath& path, std::span<const int64_t> step_counts,
                     int64_t reference_steps) {
  const std::vector<double> fine = path.increments(reference_steps);
  for (int64_t m : step_counts) {
    if (m < 1 || reference_steps % m != 0)
      throw std::invalid_argument("step counts must divide the reference step count");
    const std::vector<double> coarse = path.increments(m);
    const int64_t stride = reference_steps / m;
    for (int64_t n = 0; n < m; ++n) {
      double sum = 0.0;
      for (int64_t j = 0; j < stride; ++j) sum += fine[static_cast<size_t>(n * stride + j)];
      const double tol = 1e-12 * std::max(1.0, std::fabs(coarse[static_cast<size_t>(n)]));
      if (std::fabs(coarse[static_cast<size_t>(n)] - sum) > tol)
        throw std::logic_error("dyadic coupling identity violated at step " + std::to_string(n) +
                               " of " + std::to_string(m));
    }
  }
}

}  // namespace sks
