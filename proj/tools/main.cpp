// Command-line harness: parses flags and key=value config files, dispatches
// to the experiment library, and persists manifests, CSV tables, and JSON
// reports. All numeric output uses shortest round-trip formatting, so a rerun
// with identical inputs is byte-identical.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sks/experiments.hpp"
#include "sks/gronwall.hpp"
#include "sks/rng.hpp"
#include "sks/stepper.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kVersion = "0.1.0";
constexpr uint64_t kSimulateTag = 0x73696d75;  // per-experiment seed stream tag
constexpr uint64_t kGronwallTag = 0x67726f6e;

// ---------------------------------------------------------------------------
// formatting: shortest round-trip numbers, locale-free

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(int64_t v) {
  char buf[24];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(int v) { return fmt(static_cast<int64_t>(v)); }

// FNV-1a 64-bit over the canonical parameter text. A grouping fingerprint
// for runs, not a cryptographic digest.
std::string fingerprint(std::string_view text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17] = {};
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  return std::string("fnv1a64:") + buf;
}

// ---------------------------------------------------------------------------
// output plumbing (single writer: everything lands here from the main thread)

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

void write_json(const std::filesystem::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// configuration shared by every subcommand

struct GlobalArgs {
  std::string out = "out";
  uint64_t seed = 1;
  int workers = 1;
  double nu = 1.0;
  double length = 2.0 * std::numbers::pi;
  double horizon = 0.25;
  int order = 4;
  std::string model = "sin";
  double lambda = 0.5;
  int64_t mc = 64;
  double amplitude = 1.0;
  double newton_tol = 1e-10;
  int newton_max_iter = 30;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

int dyadic_level(int64_t steps, const std::string& what) {
  require(steps >= 1 && (steps & (steps - 1)) == 0,
          what + " must be a power of two (got " + fmt(steps) +
              "); Brownian increments couple across resolutions by dyadic refinement");
  int level = 0;
  while ((int64_t{1} << level) < steps) ++level;
  require(level <= sks::WienerPath::kMaxLevel,
          what + " must not exceed 2^" + fmt(sks::WienerPath::kMaxLevel));
  return level;
}

void validate_globals(const GlobalArgs& g) {
  require(g.order >= 4 && g.order <= 6,
          "spline order r must satisfy r >= 4 (and r <= 6): the fourth-order term needs "
          "square-integrable second derivatives, got r = " + fmt(g.order));
  require(g.length > 0.0, "domain length L must be positive");
  require(g.nu > 0.0, "viscosity nu must be positive");
  require(g.horizon > 0.0, "final time T must be positive");
  require(g.mc >= 1, "Monte Carlo sample count must be at least 1");
  require(g.workers >= 1, "worker count must be at least 1");
  require(g.newton_tol > 0.0, "Newton tolerance must be positive");
  require(g.newton_max_iter >= 1, "Newton iteration cap must be at least 1");
  require(std::isfinite(g.amplitude), "initial amplitude must be finite");
}

sks::ExperimentConfig experiment_config(const GlobalArgs& g, std::vector<double> q_list) {
  sks::ExperimentConfig config;
  config.length = g.length;
  config.order = g.order;
  config.viscosity = g.nu;
  config.horizon = g.horizon;
  config.model = sks::DiffusionModel::parse(g.model, g.lambda);
  config.u0_amplitude = g.amplitude;
  config.mc_samples = g.mc;
  config.seed = g.seed;
  config.workers = g.workers;
  config.newton_tol = g.newton_tol;
  config.newton_max_iter = g.newton_max_iter;
  if (!q_list.empty()) config.q_list = std::move(q_list);
  return config;
}

// Keeps the first occurrence of each value; duplicate q entries would only
// duplicate report columns.
std::vector<double> dedupe(const std::vector<double>& values) {
  std::vector<double> out;
  for (double v : values) {
    bool seen = false;
    for (double u : out) seen = seen || std::fabs(u - v) <= 1e-12;
    if (!seen) out.push_back(v);
  }
  return out;
}

json global_params(const GlobalArgs& g) {
  return json{{"L", g.length},
              {"nu", g.nu},
              {"T", g.horizon},
              {"r", g.order},
              {"model", g.model},
              {"lambda", g.lambda},
              {"amplitude", g.amplitude},
              {"mc", g.mc},
              {"newton_tol", g.newton_tol},
              {"newton_max_iter", g.newton_max_iter}};
}

void write_manifest(const std::filesystem::path& outdir, std::string_view experiment,
                    const GlobalArgs& g, const json& params) {
  json canonical{{"experiment", experiment}, {"seed", g.seed}, {"parameters", params}};
  json manifest;
  manifest["tool"] = "sks";
  manifest["version"] = kVersion;
  manifest["rng"] = sks::kRngAlgorithm;
  manifest["experiment"] = experiment;
  manifest["seed"] = g.seed;
  manifest["workers"] = g.workers;
  manifest["parameters"] = params;
  manifest["config_fingerprint"] = fingerprint(canonical.dump());
  write_json(outdir / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// shared sweep reporting (temporal, spatial, localized)

struct NamedFit {
  std::string column;
  sks::RateReport fit;
};

std::vector<NamedFit> sweep_fits(const sks::SweepResult& sweep, const std::vector<double>& exponents,
                                 bool localized) {
  std::vector<NamedFit> fits;
  const std::vector<double> xs = sweep.abscissae();
  const auto add = [&](std::string name, const std::vector<double>& errors) {
    // Degenerate columns (an exactly zero localized error) have no log-log fit.
    try {
      fits.push_back({std::move(name), sks::fit_rate(xs, errors)});
    } catch (const std::invalid_argument&) {
    }
  };
  for (double e : exponents) add("sup" + fmt(e), sweep.sup_errors(e));
  add("h2", sweep.h2_errors());
  if (localized) {
    for (double e : exponents) {
      std::vector<double> errors;
      for (const sks::ErrorAggregate& level : sweep.levels)
        errors.push_back(level.moment(e).loc_normalized());
      add("loc_sup" + fmt(e), errors);
    }
    std::vector<double> errors;
    for (const sks::ErrorAggregate& level : sweep.levels) errors.push_back(std::sqrt(level.loc_h2_mean));
    add("loc_h2", errors);
  }
  return fits;
}

std::string raw_norms_csv(const sks::SweepResult& sweep, const std::vector<int64_t>& level_ids) {
  std::string csv = "level,abscissa,path,sup_l2,h2_sum,ref_sup_sq,indicator\n";
  for (size_t i = 0; i < sweep.raw.size(); ++i) {
    const sks::ErrorAggregate& level = sweep.levels[i];
    for (size_t p = 0; p < sweep.raw[i].size(); ++p) {
      const sks::PathNorms& norms = sweep.raw[i][p];
      csv += fmt(level_ids[i]) + ',' + fmt(level.abscissa) + ',' + fmt(static_cast<int64_t>(p)) +
             ',' + fmt(norms.sup_l2) + ',' + fmt(norms.h2_sum) + ',' + fmt(norms.ref_sup_sq) + ',' +
             (norms.ref_sup_sq <= level.rho ? '1' : '0') + '\n';
    }
  }
  return csv;
}

std::string rate_table_csv(const sks::SweepResult& sweep, const std::vector<double>& exponents,
                           const std::vector<int64_t>& level_ids, const std::string& level_label,
                           const std::string& abscissa_label, bool localized) {
  std::string csv = level_label + ',' + abscissa_label;
  for (double e : exponents) csv += ",sup" + fmt(e);
  csv += ",h2";
  if (localized) {
    for (double e : exponents) csv += ",loc_sup" + fmt(e);
    csv += ",loc_h2,rho,omega_probability";
  }
  csv += '\n';
  for (size_t i = 0; i < sweep.levels.size(); ++i) {
    const sks::ErrorAggregate& level = sweep.levels[i];
    csv += fmt(level_ids[i]) + ',' + fmt(level.abscissa);
    for (double e : exponents) csv += ',' + fmt(level.moment(e).normalized());
    csv += ',' + fmt(level.h2_error());
    if (localized) {
      for (double e : exponents) csv += ',' + fmt(level.moment(e).loc_normalized());
      csv += ',' + fmt(std::sqrt(level.loc_h2_mean)) + ',' + fmt(level.rho) + ',' +
             fmt(level.omega_probability);
    }
    csv += '\n';
  }
  return csv;
}

std::string fits_csv(const std::vector<NamedFit>& fits) {
  std::string csv = "column,slope,intercept,fit_residual,half_width\n";
  for (const NamedFit& f : fits)
    csv += f.column + ',' + fmt(f.fit.slope) + ',' + fmt(f.fit.intercept) + ',' +
           fmt(f.fit.fit_residual) + ',' + fmt(f.fit.half_width) + '\n';
  return csv;
}

json sweep_results_json(std::string_view experiment, const sks::SweepResult& sweep,
                        const std::vector<double>& exponents, const std::vector<int64_t>& level_ids,
                        const std::string& level_label, const std::string& abscissa_label,
                        bool localized) {
  json out;
  out["experiment"] = experiment;
  out["exponents"] = exponents;
  json levels = json::array();
  for (size_t i = 0; i < sweep.levels.size(); ++i) {
    const sks::ErrorAggregate& level = sweep.levels[i];
    json row;
    row[level_label] = level_ids[i];
    row[abscissa_label] = level.abscissa;
    row["samples"] = level.samples;
    json sup = json::array();
    for (double e : exponents) {
      const sks::SupMoment& m = level.moment(e);
      json entry{{"exponent", e}, {"mean", m.mean},          {"se", m.se},
                 {"error", m.normalized()}, {"error_se", m.normalized_se()}};
      if (localized) {
        entry["loc_mean"] = m.loc_mean;
        entry["loc_se"] = m.loc_se;
        entry["loc_error"] = m.loc_normalized();
      }
      sup.push_back(std::move(entry));
    }
    row["sup"] = std::move(sup);
    row["h2"] = json{{"mean", level.h2_mean}, {"se", level.h2_se}, {"error", level.h2_error()}};
    if (localized) {
      row["loc_h2"] = json{{"mean", level.loc_h2_mean},
                           {"se", level.loc_h2_se},
                           {"error", std::sqrt(level.loc_h2_mean)}};
      row["rho"] = level.rho;
      row["omega_probability"] = level.omega_probability;
    }
    levels.push_back(std::move(row));
  }
  out["levels"] = std::move(levels);
  json fits = json::array();
  for (const NamedFit& f : sweep_fits(sweep, exponents, localized))
    fits.push_back(json{{"column", f.column},
                        {"slope", f.fit.slope},
                        {"intercept", f.fit.intercept},
                        {"fit_residual", f.fit.fit_residual},
                        {"half_width", f.fit.half_width}});
  out["fits"] = std::move(fits);
  return out;
}

void write_sweep_outputs(const std::filesystem::path& outdir, std::string_view experiment,
                         const sks::SweepResult& sweep, const std::vector<double>& q_list,
                         const std::vector<int64_t>& level_ids, const std::string& level_label,
                         const std::string& abscissa_label, bool localized) {
  const std::vector<double> exponents = sks::sup_error_exponents(q_list);
  write_text(outdir / "raw_norms.csv", raw_norms_csv(sweep, level_ids));
  write_text(outdir / "rate_table.csv",
             rate_table_csv(sweep, exponents, level_ids, level_label, abscissa_label, localized));
  write_text(outdir / "fits.csv", fits_csv(sweep_fits(sweep, exponents, localized)));
  write_json(outdir / "results.json",
             sweep_results_json(experiment, sweep, exponents, level_ids, level_label,
                                abscissa_label, localized));
}

// ---------------------------------------------------------------------------
// subcommand runners

void run_simulate(const GlobalArgs& g, const std::filesystem::path& outdir, int elements,
                  int64_t steps) {
  const int level = dyadic_level(steps, "step count M");
  const uint64_t path_seed = sks::derive_seed(g.seed, kSimulateTag, 0);
  json params = global_params(g);
  params.update(json{{"N", elements}, {"M", steps}, {"path_seed", path_seed}});
  write_manifest(outdir, "simulate", g, params);

  const sks::SplineSpace space(g.length, elements, g.order);
  const sks::Operators ops(space);
  sks::SchemeParams scheme;
  scheme.viscosity = g.nu;
  scheme.horizon = g.horizon;
  scheme.steps = steps;
  scheme.newton_tol = g.newton_tol;
  scheme.newton_max_iter = g.newton_max_iter;
  const sks::DiffusionModel model = sks::DiffusionModel::parse(g.model, g.lambda);
  const double freq = 2.0 * std::numbers::pi / g.length;
  const sks::Coefficients initial = sks::initial_state(
      space, ops, [amp = g.amplitude, freq](double x) { return amp * std::sin(freq * x); });
  const sks::WienerPath path(path_seed, g.horizon, level);
  sks::Stepper stepper(space, ops, model, scheme);
  const sks::Trajectory trajectory = stepper.run(initial, path);

  std::string csv = "n,t";
  for (int j = 0; j < space.size(); ++j) csv += ",c" + fmt(j);
  csv += '\n';
  for (size_t n = 0; n < trajectory.states.size(); ++n) {
    csv += fmt(static_cast<int64_t>(n)) + ',' + fmt(trajectory.dt * static_cast<double>(n));
    for (double c : trajectory.states[n]) csv += ',' + fmt(c);
    csv += '\n';
  }
  write_text(outdir / "trajectory.csv", csv);

  double sup = 0.0;
  double h2_sum = 0.0;
  for (size_t n = 0; n < trajectory.states.size(); ++n) {
    sup = std::max(sup, ops.l2_norm(trajectory.states[n]));
    if (n > 0) {
      const double h2 = ops.h2_seminorm(trajectory.states[n]);
      h2_sum += h2 * h2;
    }
  }
  int max_iterations = 0;
  double max_residual = 0.0;
  for (const sks::StepStats& stats : trajectory.newton) {
    max_iterations = std::max(max_iterations, stats.iterations);
    max_residual = std::max(max_residual, stats.residual);
  }
  json results;
  results["experiment"] = "simulate";
  results["terminal_l2"] = ops.l2_norm(trajectory.states.back());
  results["sup_l2"] = sup;
  results["h2_time_integral"] = trajectory.dt * h2_sum;
  results["newton"] = json{{"max_iterations", max_iterations}, {"max_residual", max_residual}};
  write_json(outdir / "results.json", results);
}

void run_temporal(const GlobalArgs& g, const std::filesystem::path& outdir, int elements,
                  const std::vector<int64_t>& step_list, int64_t reference_steps,
                  const std::vector<double>& q_list) {
  for (int64_t m : step_list) (void)dyadic_level(m, "step count M");
  (void)dyadic_level(reference_steps, "reference step count");
  json params = global_params(g);
  params.update(json{{"N", elements},
                     {"M", step_list},
                     {"ref_M", reference_steps},
                     {"q", q_list},
                     {"workers", g.workers}});
  write_manifest(outdir, "convergence-time", g, params);

  const sks::ExperimentConfig config = experiment_config(g, q_list);
  sks::TemporalRateRequest request;
  request.elements = elements;
  request.step_list = step_list;
  request.reference_steps = reference_steps;
  const sks::SweepResult sweep = sks::temporal_rate(config, request);
  write_sweep_outputs(outdir, "convergence-time", sweep, config.q_list, step_list, "steps", "dt",
                      false);
}

void run_spatial(const GlobalArgs& g, const std::filesystem::path& outdir,
                 const std::vector<int>& element_list, int reference_elements, int64_t steps,
                 const std::vector<double>& q_list, bool localize, double beta,
                 double embedding_constant) {
  (void)dyadic_level(steps, "step count M");
  const std::string name = localize ? "localized" : "convergence-space";
  json params = global_params(g);
  params.update(json{{"N", element_list},
                     {"ref_N", reference_elements},
                     {"M", steps},
                     {"q", q_list},
                     {"workers", g.workers}});
  if (localize) params.update(json{{"beta", beta}, {"ce", embedding_constant}});
  write_manifest(outdir, name, g, params);

  const sks::ExperimentConfig config = experiment_config(g, q_list);
  sks::SpatialRateRequest request;
  request.steps = steps;
  request.element_list = element_list;
  request.reference_elements = reference_elements;
  request.localize = localize;
  request.beta = beta;
  request.embedding_constant = embedding_constant;
  const sks::SweepResult sweep = sks::spatial_rate(config, request);
  std::vector<int64_t> level_ids(element_list.begin(), element_list.end());
  write_sweep_outputs(outdir, name, sweep, config.q_list, level_ids, "elements", "h", localize);
}

void run_stability(const GlobalArgs& g, const std::filesystem::path& outdir, int elements,
                   const std::vector<int64_t>& step_list) {
  for (int64_t m : step_list) (void)dyadic_level(m, "step count M");
  json params = global_params(g);
  params.update(json{{"N", elements}, {"M", step_list}, {"workers", g.workers}});
  write_manifest(outdir, "stability", g, params);

  const sks::ExperimentConfig config = experiment_config(g, {});
  sks::StabilityRequest request;
  request.elements = elements;
  request.step_list = step_list;
  const std::vector<sks::MomentReport> reports = sks::stability_stats(config, request);

  std::string csv = "steps,path,sup_norm,h2_time\n";
  for (const sks::MomentReport& report : reports)
    for (size_t p = 0; p < report.raw_sup.size(); ++p)
      csv += fmt(report.steps) + ',' + fmt(static_cast<int64_t>(p)) + ',' + fmt(report.raw_sup[p]) +
             ',' + fmt(report.raw_h2[p]) + '\n';
  write_text(outdir / "raw_norms.csv", csv);

  json results;
  results["experiment"] = "stability";
  json levels = json::array();
  for (const sks::MomentReport& report : reports) {
    json moments = json::array();
    for (size_t i = 0; i < report.exponents.size(); ++i)
      moments.push_back(json{{"exponent", report.exponents[i]},
                             {"mean", report.means[i]},
                             {"se", report.ses[i]}});
    levels.push_back(json{{"steps", report.steps},
                          {"dt", report.dt},
                          {"moments", std::move(moments)},
                          {"h2_time", json{{"mean", report.h2_time_mean}, {"se", report.h2_time_se}}}});
  }
  results["levels"] = std::move(levels);
  write_json(outdir / "results.json", results);
}

void run_holder(const GlobalArgs& g, const std::filesystem::path& outdir, int elements,
                int64_t steps, const std::vector<int>& derivative_list,
                const std::vector<double>& q_list, const std::vector<int>& gap_list, int offsets) {
  (void)dyadic_level(steps, "step count M");
  json params = global_params(g);
  params.update(json{{"N", elements},
                     {"M", steps},
                     {"derivatives", derivative_list},
                     {"q", q_list},
                     {"gaps", gap_list},
                     {"offsets", offsets},
                     {"workers", g.workers}});
  write_manifest(outdir, "holder", g, params);

  const sks::ExperimentConfig config = experiment_config(g, {});
  sks::HolderRequest request;
  request.elements = elements;
  request.steps = steps;
  request.derivative_list = derivative_list;
  request.q_list = q_list;
  request.gap_list = gap_list;
  request.offsets = offsets;
  const std::vector<sks::HolderQuotient> table = sks::holder_quotients(config, request);

  std::string csv = "derivative,q,gap,quotient\n";
  for (const sks::HolderQuotient& row : table)
    for (size_t i = 0; i < gap_list.size(); ++i)
      csv += fmt(row.derivative) + ',' + fmt(row.q) + ',' + fmt(gap_list[i]) + ',' +
             fmt(row.per_gap[i]) + '\n';
  write_text(outdir / "quotients.csv", csv);

  json results;
  results["experiment"] = "holder";
  results["gaps"] = gap_list;
  json rows = json::array();
  for (const sks::HolderQuotient& row : table) {
    const auto [lo, hi] = std::minmax_element(row.per_gap.begin(), row.per_gap.end());
    rows.push_back(json{{"derivative", row.derivative},
                        {"q", row.q},
                        {"per_gap", row.per_gap},
                        {"max_quotient", row.max_quotient},
                        {"spread", *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::max()}});
  }
  results["quotients"] = std::move(rows);
  write_json(outdir / "results.json", results);
}

void run_exp_moment(const GlobalArgs& g, const std::filesystem::path& outdir, int elements,
                    int64_t steps, double kappa, bool kappa_given) {
  (void)dyadic_level(steps, "step count M");
  const sks::DiffusionModel model = sks::DiffusionModel::parse(g.model, g.lambda);
  const double threshold = sks::exp_moment_threshold(model, g.length);
  if (!kappa_given) {
    kappa = std::min(threshold, 0.05);
    if (kappa == 0.0)
      std::cerr << "warning: model " << model.name()
                << " admits no positive exponential-moment exponent; using kappa = 0\n";
  }
  json params = global_params(g);
  params.update(json{{"N", elements},
                     {"M", steps},
                     {"kappa", kappa},
                     {"kappa_threshold", std::isfinite(threshold) ? json(threshold) : json("infinity")},
                     {"workers", g.workers}});
  write_manifest(outdir, "exp-moment", g, params);

  const sks::ExperimentConfig config = experiment_config(g, {});
  sks::ExpMomentRequest request;
  request.elements = elements;
  request.steps = steps;
  request.kappa = kappa;
  const sks::ExpMomentReport report = sks::exp_moment_stats(config, request);

  std::string csv = "path,value\n";
  for (size_t p = 0; p < report.raw.size(); ++p)
    csv += fmt(static_cast<int64_t>(p)) + ',' + fmt(report.raw[p]) + '\n';
  write_text(outdir / "samples.csv", csv);

  json results;
  results["experiment"] = "exp-moment";
  results["kappa"] = report.kappa;
  results["kappa_threshold"] = std::isfinite(threshold) ? json(threshold) : json("infinity");
  results["mean"] = report.mean;
  results["se"] = report.se;
  results["samples"] = report.samples;
  write_json(outdir / "results.json", results);
}

void run_gronwall(const GlobalArgs& g, const std::filesystem::path& outdir, int64_t instances,
                  int64_t samples, const std::vector<double>& q_list, int horizon_max) {
  require(instances >= 1, "instance count must be at least 1");
  require(samples >= 1, "sample count must be at least 1");
  require(horizon_max >= 1, "horizon bound must be at least 1");
  require(!q_list.empty(), "q list must not be empty");
  for (double q : q_list)
    require(q > 0.0 && q < 1.0, "gronwall exponent q must lie in (0, 1), got " + fmt(q));
  json params = global_params(g);
  params.update(
      json{{"instances", instances}, {"samples", samples}, {"q", q_list}, {"n_max", horizon_max}});
  write_manifest(outdir, "gronwall-check", g, params);

  std::string csv = "instance,q,alpha,horizon,zero_rates,lhs,rhs,relative_se,holds\n";
  int64_t violations = 0;
  double max_ratio = 0.0;
  for (int64_t i = 0; i < instances; ++i) {
    const uint64_t instance_seed = sks::derive_seed(g.seed, kGronwallTag, static_cast<uint64_t>(i));
    sks::NormalGenerator knobs(sks::derive_seed(instance_seed, 1, 0));
    const double q = q_list[static_cast<size_t>(i) % q_list.size()];
    // alpha in (1, 0.99/q]: the conjugate-exponent hypothesis q*alpha < 1
    // holds for every draw.
    const double alpha = 1.0 + knobs.uniform() * (0.99 / q - 1.0);
    const int horizon = 1 + static_cast<int>(knobs.raw() % static_cast<uint64_t>(horizon_max));
    sks::GronwallGeneratorOptions options;
    options.samples = samples;
    options.zero_rates = (i % 7 == 6);
    const sks::GronwallInstance instance =
        sks::generate_instance(sks::derive_seed(instance_seed, 2, 0), horizon, q, alpha, options);
    const sks::GronwallCheck check = sks::verify_bound(instance);
    if (!check.holds) ++violations;
    if (check.rhs > 0.0) max_ratio = std::max(max_ratio, check.lhs / check.rhs);
    csv += fmt(i) + ',' + fmt(q) + ',' + fmt(alpha) + ',' + fmt(horizon) + ',' +
           (options.zero_rates ? '1' : '0') + ',' + fmt(check.lhs) + ',' + fmt(check.rhs) + ',' +
           fmt(check.relative_se) + ',' + (check.holds ? '1' : '0') + '\n';
  }
  write_text(outdir / "checks.csv", csv);

  json results;
  results["experiment"] = "gronwall-check";
  results["instances"] = instances;
  results["samples"] = samples;
  results["q"] = q_list;
  results["violations"] = violations;
  results["max_lhs_over_rhs"] = max_ratio;
  write_json(outdir / "results.json", results);
}

// ---------------------------------------------------------------------------
// failure reporting: machine-readable JSON on stderr plus error.json when the
// output directory is writable

int fail(const std::filesystem::path& outdir, std::string_view kind, int exit_code, json detail) {
  detail["kind"] = kind;
  detail["exit_code"] = exit_code;
  json report;
  report["error"] = std::move(detail);
  std::cerr << report.dump(2) << '\n';
  try {
    write_json(outdir / "error.json", report);
  } catch (...) {
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo harness for a stochastic Kuramoto-Sivashinsky finite element solver"};
  app.set_version_flag("--version", std::string("sks ") + std::string(kVersion));
  app.set_config("--config", "", "key=value configuration file; flags override file values");
  app.allow_config_extras(false);
  app.fallthrough();
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--out", g.out, "output directory (created if missing)")->capture_default_str();
  app.add_option("--seed", g.seed, "master seed; all streams derive from it")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads for Monte Carlo paths")
      ->capture_default_str();
  app.add_option("--nu", g.nu, "viscosity of the fourth-order term")->capture_default_str();
  app.add_option("--L", g.length, "domain length")->capture_default_str();
  app.add_option("--T", g.horizon, "final time")->capture_default_str();
  app.add_option("--r", g.order, "spline order (4..6)")->capture_default_str();
  app.add_option("--model", g.model, "diffusion coefficient")
      ->check(CLI::IsMember({"zero", "sin", "cos", "rational", "linear"}))
      ->capture_default_str();
  app.add_option("--lambda", g.lambda, "slope of the linear model")->capture_default_str();
  app.add_option("--mc", g.mc, "Monte Carlo sample count")->capture_default_str();
  app.add_option("--amp", g.amplitude, "initial-condition amplitude")->capture_default_str();
  app.add_option("--newton-tol", g.newton_tol, "Newton residual tolerance")->capture_default_str();
  app.add_option("--newton-max-iter", g.newton_max_iter, "Newton iteration cap")
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "run one trajectory and store it");
  int sim_elements = 64;
  int64_t sim_steps = 256;
  simulate->add_option("--N", sim_elements, "mesh elements")->capture_default_str();
  simulate->add_option("--M", sim_steps, "time steps (power of two)")->capture_default_str();

  auto* temporal = app.add_subcommand("convergence-time", "strong error against a coupled fine-step reference");
  int ct_elements = 64;
  std::vector<int64_t> ct_steps = {64, 128, 256, 512, 1024};
  int64_t ct_ref = 8192;
  std::vector<double> ct_q = {0.5, 0.75};
  temporal->add_option("--N", ct_elements, "mesh elements")->capture_default_str();
  temporal->add_option("--M", ct_steps, "step-count ladder (powers of two)")
      ->delimiter(',')
      ->capture_default_str();
  temporal->add_option("--ref-M", ct_ref, "reference step count")->capture_default_str();
  temporal->add_option("--q", ct_q, "moment exponents q of the sup error")
      ->delimiter(',')
      ->capture_default_str();

  auto* spatial = app.add_subcommand("convergence-space", "strong error against a nested fine-mesh reference");
  std::vector<int> cs_elements = {8, 16, 32, 64};
  int cs_ref = 256;
  int64_t cs_steps = 4096;
  std::vector<double> cs_q = {0.5, 0.75};
  spatial->add_option("--N", cs_elements, "element-count ladder (each double of the last)")
      ->delimiter(',')
      ->capture_default_str();
  spatial->add_option("--ref-N", cs_ref, "reference element count")->capture_default_str();
  spatial->add_option("--M", cs_steps, "time steps (power of two)")->capture_default_str();
  spatial->add_option("--q", cs_q, "moment exponents q of the sup error")
      ->delimiter(',')
      ->capture_default_str();

  auto* localized = app.add_subcommand("localized", "spatial sweep with errors clipped to the bounded-solution event");
  std::vector<int> loc_elements = {16, 32, 64};
  int loc_ref = 256;
  int64_t loc_steps = 256;
  std::vector<double> loc_q = {0.5, 0.75};
  double loc_beta = 0.5;
  double loc_ce = 1.0;
  localized->add_option("--N", loc_elements, "element-count ladder (each double of the last)")
      ->delimiter(',')
      ->capture_default_str();
  localized->add_option("--ref-N", loc_ref, "reference element count")->capture_default_str();
  localized->add_option("--M", loc_steps, "time steps (power of two)")->capture_default_str();
  localized->add_option("--q", loc_q, "moment exponents q of the sup error")
      ->delimiter(',')
      ->capture_default_str();
  localized->add_option("--beta", loc_beta, "mesh exponent of the threshold rho(h)")
      ->capture_default_str();
  localized->add_option("--ce", loc_ce, "embedding constant in the threshold rho(h)")
      ->capture_default_str();

  auto* stability = app.add_subcommand("stability", "moment statistics of the solution itself");
  int st_elements = 64;
  std::vector<int64_t> st_steps = {512, 1024};
  stability->add_option("--N", st_elements, "mesh elements")->capture_default_str();
  stability->add_option("--M", st_steps, "step counts (powers of two)")
      ->delimiter(',')
      ->capture_default_str();

  auto* holder = app.add_subcommand("holder", "time-regularity quotients of moment differences");
  int ho_elements = 64;
  int64_t ho_steps = 2048;
  std::vector<int> ho_derivs = {0, 1, 2};
  std::vector<double> ho_q = {0.5, 1.0};
  std::vector<int> ho_gaps = {1, 2, 4, 8};
  int ho_offsets = 16;
  holder->add_option("--N", ho_elements, "mesh elements")->capture_default_str();
  holder->add_option("--M", ho_steps, "time steps (power of two)")->capture_default_str();
  holder->add_option("--derivs", ho_derivs, "spatial derivative orders (0..2)")
      ->delimiter(',')
      ->capture_default_str();
  holder->add_option("--q", ho_q, "moment exponents of the squared increment")
      ->delimiter(',')
      ->capture_default_str();
  holder->add_option("--gaps", ho_gaps, "time gaps in steps")->delimiter(',')->capture_default_str();
  holder->add_option("--offsets", ho_offsets, "start offsets probed per gap")->capture_default_str();

  auto* expmoment = app.add_subcommand("exp-moment", "sampled exponential moment of the energy functional");
  int em_elements = 64;
  int64_t em_steps = 256;
  double em_kappa = 0.0;
  expmoment->add_option("--N", em_elements, "mesh elements")->capture_default_str();
  expmoment->add_option("--M", em_steps, "time steps (power of two)")->capture_default_str();
  auto* kappa_opt = expmoment->add_option(
      "--kappa", em_kappa, "exponent kappa; default min(admissible threshold, 0.05)");

  auto* gronwall = app.add_subcommand("gronwall-check", "verify the discrete stochastic Gronwall bound on generated instances");
  int64_t gw_instances = 1000;
  int64_t gw_samples = 2048;
  std::vector<double> gw_q = {0.3, 0.5, 0.7};
  int gw_nmax = 64;
  gronwall->add_option("--instances", gw_instances, "number of generated instances")
      ->capture_default_str();
  gronwall->add_option("--samples", gw_samples, "Monte Carlo paths per instance")
      ->capture_default_str();
  gronwall->add_option("--q", gw_q, "moment exponents cycled over instances")
      ->delimiter(',')
      ->capture_default_str();
  gronwall->add_option("--n-max", gw_nmax, "largest instance horizon")->capture_default_str();

  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::filesystem::path outdir(g.out);
  try {
    std::filesystem::create_directories(outdir);
    validate_globals(g);
    if (simulate->parsed()) {
      run_simulate(g, outdir, sim_elements, sim_steps);
    } else if (temporal->parsed()) {
      run_temporal(g, outdir, ct_elements, ct_steps, ct_ref, dedupe(ct_q));
    } else if (spatial->parsed()) {
      run_spatial(g, outdir, cs_elements, cs_ref, cs_steps, dedupe(cs_q), false, 0.5, 1.0);
    } else if (localized->parsed()) {
      run_spatial(g, outdir, loc_elements, loc_ref, loc_steps, dedupe(loc_q), true, loc_beta,
                  loc_ce);
    } else if (stability->parsed()) {
      run_stability(g, outdir, st_elements, st_steps);
    } else if (holder->parsed()) {
      run_holder(g, outdir, ho_elements, ho_steps, ho_derivs, dedupe(ho_q), ho_gaps, ho_offsets);
    } else if (expmoment->parsed()) {
      run_exp_moment(g, outdir, em_elements, em_steps, em_kappa, kappa_opt->count() > 0);
    } else if (gronwall->parsed()) {
      run_gronwall(g, outdir, gw_instances, gw_samples, dedupe(gw_q), gw_nmax);
    }
    return 0;
  } catch (const sks::ExperimentDivergence& e) {
    return fail(outdir, "divergence", 3,
                json{{"what", e.what()},
                     {"experiment", e.experiment},
                     {"steps", e.steps},
                     {"elements", e.elements},
                     {"path_seed", e.path_seed},
                     {"path_index", e.path_index},
                     {"step_index", e.step_index},
                     {"iterations", e.iterations},
                     {"residual", e.residual}});
  } catch (const sks::NewtonDivergence& e) {
    return fail(outdir, "divergence", 3,
                json{{"what", e.what()},
                     {"step_index", e.step_index},
                     {"iterations", e.iterations},
                     {"residual", e.residual}});
  } catch (const sks::ExponentOverflow& e) {
    return fail(outdir, "overflow", 2,
                json{{"what", e.what()}, {"argument", e.argument}, {"kappa", e.kappa}});
  } catch (const std::invalid_argument& e) {
    return fail(outdir, "config", 2, json{{"what", e.what()}});
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(outdir, "config", 2, json{{"what", e.what()}});
  } catch (const std::logic_error& e) {
    return fail(outdir, "invariant", 4, json{{"what", e.what()}});
  } catch (const std::exception& e) {
    return fail(outdir, "internal", 4, json{{"what", e.what()}});
  }
}
