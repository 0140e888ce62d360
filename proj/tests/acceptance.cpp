// Acceptance gate: one full-scale check per release criterion, each printing
// a single pass/fail line. Tolerances are pinned here, not configurable.
// Pass the CLI binary path as the first non-flag argument; the final
// criterion drives the binary end to end.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sks/assembly.hpp"
#include "sks/experiments.hpp"
#include "sks/gronwall.hpp"
#include "sks/noise.hpp"
#include "sks/rng.hpp"
#include "sks/spline.hpp"
#include "sks/stepper.hpp"

namespace {

std::string g_cli;  // path of the sks binary, from argv

void report(int id, const std::string& label, bool ok, const std::string& detail) {
  std::printf("criterion %2d  %-46s %s%s%s\n", id, label.c_str(), ok ? "pass" : "FAIL",
              detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Criteria 1, 3, and 4 read three error columns of one temporal sweep, so it
// is computed once: defaults everywhere (L = 2pi, nu = 1, T = 0.25, r = 4,
// N = 64, u0 = sin x, model sin, 64 samples, M in {64..1024}, reference 8192).
const sks::SweepResult& temporal_sweep() {
  static const sks::SweepResult sweep = [] {
    const sks::ExperimentConfig config;
    const sks::TemporalRateRequest request;
    return sks::temporal_rate(config, request);
  }();
  return sweep;
}

double fitted_slope(const sks::SweepResult& sweep, const std::vector<double>& errors) {
  return sks::fit_rate(sweep.abscissae(), errors).slope;
}

}  // namespace

TEST_CASE("criterion 1: temporal strong rate of the mean sup error") {
  const sks::SweepResult& sweep = temporal_sweep();
  const double slope = fitted_slope(sweep, sweep.sup_errors(1.0));
  const bool ok = slope >= 0.35 && slope <= 0.65;
  CHECK(ok);
  report(1, "temporal strong rate in [0.35, 0.65]", ok, "slope " + num(slope));
}

TEST_CASE("criterion 2: spatial rate, deterministic and stochastic") {
  sks::SpatialRateRequest request;
  request.steps = 4096;
  request.element_list = {8, 16, 32, 64};
  request.reference_elements = 256;

  sks::ExperimentConfig deterministic;
  deterministic.model = sks::DiffusionModel::zero();
  deterministic.mc_samples = 1;
  const sks::SweepResult zero_sweep = sks::spatial_rate(deterministic, request);
  const double zero_slope = fitted_slope(zero_sweep, zero_sweep.sup_errors(1.0));

  sks::ExperimentConfig stochastic;
  stochastic.mc_samples = 32;
  const sks::SweepResult sin_sweep = sks::spatial_rate(stochastic, request);
  const double sin_slope = fitted_slope(sin_sweep, sin_sweep.sup_errors(1.0));

  const bool ok = zero_slope >= 1.7 && sin_slope >= 1.7;
  CHECK(ok);
  report(2, "spatial rate >= 1.7 (zero and sin models)", ok,
         "slopes " + num(zero_slope) + " / " + num(sin_slope));
}

TEST_CASE("criterion 3: temporal rate of the integrated bending error") {
  const sks::SweepResult& sweep = temporal_sweep();
  const double slope = fitted_slope(sweep, sweep.h2_errors());
  const bool ok = slope >= 0.35;
  CHECK(ok);
  report(3, "bending-error temporal rate >= 0.35", ok, "slope " + num(slope));
}

TEST_CASE("criterion 4: fourth-moment error rate and ordering") {
  const sks::SweepResult& sweep = temporal_sweep();
  const double slope = fitted_slope(sweep, sweep.sup_errors(2.0));
  bool ordered = true;
  for (const sks::ErrorAggregate& level : sweep.levels)
    ordered = ordered &&
              level.moment(2.0).normalized() >= level.moment(1.0).normalized() * (1.0 - 1e-12);
  const bool ok = slope >= 0.35 && slope <= 0.65 && ordered;
  CHECK(ok);
  report(4, "fourth-moment rate in [0.35, 0.65], ordered", ok, "slope " + num(slope));
}

TEST_CASE("criterion 5: localized errors under unbounded noise") {
  sks::ExperimentConfig config;
  config.model = sks::DiffusionModel::linear(0.5);
  config.u0_amplitude = 0.1;
  sks::SpatialRateRequest request;
  request.steps = 256;
  request.element_list = {16, 32, 64};
  request.reference_elements = 256;
  request.localize = true;
  request.beta = 0.5;
  request.embedding_constant = 1.0;
  const sks::SweepResult sweep = sks::spatial_rate(config, request);

  bool clipped = true;
  for (const sks::ErrorAggregate& level : sweep.levels) {
    for (const sks::SupMoment& m : level.sup_moments)
      clipped = clipped && m.loc_mean <= m.mean * (1.0 + 1e-12);
    clipped = clipped && level.loc_h2_mean <= level.h2_mean * (1.0 + 1e-12);
  }
  const std::vector<double> omega = sweep.omega_probabilities();
  bool monotone = true;
  for (size_t i = 1; i < omega.size(); ++i) monotone = monotone && omega[i] >= omega[i - 1];
  const bool covered = omega.back() >= 0.9;
  const bool ok = clipped && monotone && covered;
  CHECK(ok);
  std::string probs;
  for (double p : omega) probs += (probs.empty() ? "" : ", ") + num(p);
  report(5, "localized <= raw, P(Omega) rising to >= 0.9", ok, "P = {" + probs + "}");
}

TEST_CASE("criterion 6: moment stability across a step halving") {
  const sks::ExperimentConfig config;
  const sks::StabilityRequest request;  // N = 64, M in {512, 1024}
  const std::vector<sks::MomentReport> reports = sks::stability_stats(config, request);
  bool finite = reports.size() == 2;
  for (const sks::MomentReport& r : reports) {
    for (double m : r.means) finite = finite && std::isfinite(m) && m > 0.0;
    for (double s : r.ses) finite = finite && std::isfinite(s);
    finite = finite && std::isfinite(r.h2_time_mean);
  }
  const double ratio = reports[1].h2_time_mean / reports[0].h2_time_mean;
  const bool ok = finite && ratio >= 0.5 && ratio <= 2.0;
  CHECK(ok);
  report(6, "moments finite, bending energy within 2x", ok, "ratio " + num(ratio));
}

TEST_CASE("criterion 7: structural invariants of the discretization") {
  bool ok = true;
  std::string failure;
  const auto note = [&](bool pass, const std::string& what) {
    if (!pass && failure.empty()) failure = what;
    ok = ok && pass;
  };
  for (int order : {4, 5}) {
    for (int elements : {8, 16, 32}) {
      const sks::SplineSpace space(2.0 * std::numbers::pi, elements, order);
      const sks::Operators ops(space);
      const int n = space.size();
      const std::string where = " (N=" + std::to_string(elements) + ", r=" + std::to_string(order) + ")";

      const sks::Coefficients ones(static_cast<size_t>(n), 1.0);
      double unity = 0.0;
      for (int s = 0; s < 512; ++s) {
        const double x = space.length() * (static_cast<double>(s) + 0.21) / 512.0;
        unity = std::max(unity, std::fabs(space.value(ones, x) - 1.0));
      }
      note(unity <= 1e-12, "partition of unity" + where);

      sks::NormalGenerator gen(31 + static_cast<uint64_t>(order * 100 + elements));
      sks::Coefficients c(static_cast<size_t>(n));
      for (double& v : c) v = gen.normal();
      space.remove_mean(c);
      std::vector<double> nl(static_cast<size_t>(n));
      sks::convection(space, c, nl);
      double dot = 0.0;
      double scale = 0.0;
      for (int i = 0; i < n; ++i) {
        dot += c[static_cast<size_t>(i)] * nl[static_cast<size_t>(i)];
        scale += std::fabs(c[static_cast<size_t>(i)] * nl[static_cast<size_t>(i)]);
      }
      note(std::fabs(dot) <= 1e-10 * std::max(1.0, scale), "convection skew-symmetry" + where);

      double asym = 0.0;
      double magnitude = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          asym = std::max(asym, std::fabs(ops.mass.get(i, j) - ops.mass.get(j, i)));
          magnitude = std::max(magnitude, std::fabs(ops.mass.get(i, j)));
        }
      note(asym <= 1e-14 * magnitude, "mass symmetry" + where);
      bool positive = true;
      for (int trial = 0; trial < 5; ++trial) {
        sks::Coefficients v(static_cast<size_t>(n));
        for (double& e : v) e = gen.normal();
        positive = positive && ops.mass.inner(v, v) > 0.0;
      }
      note(positive, "mass positive definiteness" + where);

      std::vector<double> image(static_cast<size_t>(n));
      for (const sks::PeriodicBandMatrix* form : {&ops.bending, &ops.gradient}) {
        form->apply(ones, image);
        double norm = 0.0;
        double row_scale = 0.0;
        for (int i = 0; i < n; ++i) {
          norm = std::max(norm, std::fabs(image[static_cast<size_t>(i)]));
          double row = 0.0;
          for (int j = 0; j < n; ++j) row += std::fabs(form->get(i, j));
          row_scale = std::max(row_scale, row);
        }
        note(norm <= 1e-10 * row_scale, "constants span the form kernel" + where);
      }

      const auto f = [](double x) { return std::exp(std::sin(x)) - 1.3; };
      const sks::Coefficients p = sks::l2_project(space, ops, f);
      const sks::Coefficients p2 =
          sks::l2_project(space, ops, [&](double x) { return space.value(p, x); });
      double drift = 0.0;
      double size = 1.0;
      for (int i = 0; i < n; ++i) {
        drift = std::max(drift, std::fabs(p[static_cast<size_t>(i)] - p2[static_cast<size_t>(i)]));
        size = std::max(size, std::fabs(p[static_cast<size_t>(i)]));
      }
      note(drift <= 1e-11 * size, "projection idempotence" + where);

      sks::Coefficients d(static_cast<size_t>(n));
      for (double& v : d) v = gen.normal();
      sks::PeriodicBandMatrix jac(n, order - 1);
      sks::convection_jacobian(space, c, jac);
      std::vector<double> jd(static_cast<size_t>(n));
      jac.apply(d, jd);
      double fd_error = 0.0;
      double fd_scale = 1e-30;
      // Central differences are exact for the quadratic convection term, so
      // the two epsilons must both reproduce the Jacobian to roundoff.
      for (const double eps : {1e-4, 5e-5}) {
        sks::Coefficients plus = c;
        sks::Coefficients minus = c;
        for (int i = 0; i < n; ++i) {
          plus[static_cast<size_t>(i)] += eps * d[static_cast<size_t>(i)];
          minus[static_cast<size_t>(i)] -= eps * d[static_cast<size_t>(i)];
        }
        std::vector<double> npl(static_cast<size_t>(n));
        std::vector<double> nmi(static_cast<size_t>(n));
        sks::convection(space, plus, npl);
        sks::convection(space, minus, nmi);
        for (int i = 0; i < n; ++i) {
          const double fd = (npl[static_cast<size_t>(i)] - nmi[static_cast<size_t>(i)]) / (2.0 * eps);
          fd_error = std::max(fd_error, std::fabs(fd - jd[static_cast<size_t>(i)]));
          fd_scale = std::max(fd_scale, std::fabs(jd[static_cast<size_t>(i)]));
        }
      }
      note(fd_error <= 1e-7 * fd_scale, "convection Jacobian vs finite differences" + where);
    }
  }
  CHECK(ok);
  report(7, "structural invariants (N in {8,16,32}, r in {4,5})", ok, failure);
}

TEST_CASE("criterion 8: projection approximation order") {
  const double length = 2.0 * std::numbers::pi;
  const auto f = [&](double x) { return std::sin(2.0 * std::numbers::pi * x / length); };
  const sks::QuadratureRule fine = sks::QuadratureRule::gauss_legendre(6);
  std::vector<double> hs;
  std::vector<double> errors;
  for (int elements : {8, 16, 32, 64}) {
    const sks::SplineSpace space(length, elements, 4);
    const sks::Operators ops(space);
    const sks::Coefficients p = sks::l2_project(space, ops, f);
    // Four 6-point Gauss panels per element: the quadrature error decays far
    // faster than the h^4 projection error being measured.
    double err_sq = 0.0;
    const double h = space.mesh_size();
    for (int e = 0; e < elements; ++e)
      for (int sub = 0; sub < 4; ++sub) {
        const double a = (static_cast<double>(e) + 0.25 * sub) * h;
        for (int gq = 0; gq < fine.size(); ++gq) {
          const double x = a + 0.25 * h * fine.nodes()[gq];
          const double diff = f(x) - space.value(p, x);
          err_sq += 0.25 * h * fine.weights()[gq] * diff * diff;
        }
      }
    hs.push_back(h);
    errors.push_back(std::sqrt(err_sq));
  }
  const double slope = sks::fit_rate(hs, errors).slope;
  const bool ok = slope >= 3.7 && slope <= 4.3;
  CHECK(ok);
  report(8, "projection error order in [3.7, 4.3]", ok, "slope " + num(slope));
}

TEST_CASE("criterion 9: Brownian increment consistency") {
  int64_t checks = 0;
  double worst = 0.0;
  for (uint64_t p = 0; p < 11; ++p) {
    const sks::WienerPath path(1000 + p, 1.0, 10);
    for (int64_t steps = 32; steps <= 512; steps *= 2) {
      const std::vector<double> coarse = path.increments(steps);
      const std::vector<double> fine = path.increments(2 * steps);
      for (int64_t m = 0; m < steps; ++m) {
        const double gap =
            std::fabs(coarse[static_cast<size_t>(m)] - (fine[static_cast<size_t>(2 * m)] +
                                                        fine[static_cast<size_t>(2 * m + 1)]));
        worst = std::max(worst, gap);
        ++checks;
      }
    }
  }
  const bool telescoping = checks >= 10000 && worst <= 1e-12;

  const sks::WienerPath sampler(77, 1.0, 17);
  const std::vector<double>& draws = sampler.finest();
  const double k = 1.0 / static_cast<double>(int64_t{1} << 17);
  const int64_t n = 100000;
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += draws[static_cast<size_t>(i)];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = draws[static_cast<size_t>(i)] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  const bool variance_ok = std::fabs(var - k) <= 0.05 * k;

  const bool ok = telescoping && variance_ok;
  CHECK(ok);
  report(9, "increment sums exact, variance within 5%", ok,
         std::to_string(checks) + " checks, var/k " + num(var / k));
}

TEST_CASE("criterion 10: stochastic Gronwall bound on generated instances") {
  const std::vector<double> qs = {0.3, 0.5, 0.7};
  int64_t violations = 0;
  double max_ratio = 0.0;
  for (int64_t i = 0; i < 1000; ++i) {
    const uint64_t instance_seed = sks::derive_seed(42, 0x67726f6e, static_cast<uint64_t>(i));
    sks::NormalGenerator knobs(sks::derive_seed(instance_seed, 1, 0));
    const double q = qs[static_cast<size_t>(i) % qs.size()];
    const double alpha = 1.0 + knobs.uniform() * (0.99 / q - 1.0);
    const int horizon = 1 + static_cast<int>(knobs.raw() % 64);
    sks::GronwallGeneratorOptions options;
    options.samples = 2048;
    options.zero_rates = (i % 7 == 6);
    const sks::GronwallInstance instance =
        sks::generate_instance(sks::derive_seed(instance_seed, 2, 0), horizon, q, alpha, options);
    const sks::GronwallCheck check = sks::verify_bound(instance);
    if (!check.holds) ++violations;
    if (check.rhs > 0.0) max_ratio = std::max(max_ratio, check.lhs / check.rhs);
  }
  const bool ok = violations == 0;
  CHECK(ok);
  report(10, "1000 instances, zero bound violations", ok,
         "max lhs/rhs " + num(max_ratio));
}

TEST_CASE("criterion 11: exponential moment stability under doubling") {
  sks::ExperimentConfig config;
  sks::ExpMomentRequest request;  // N = 64, M = 256
  request.kappa = std::min(sks::exp_moment_threshold(config.model, config.length), 0.05);
  const sks::ExpMomentReport base = sks::exp_moment_stats(config, request);
  config.mc_samples = 128;
  const sks::ExpMomentReport doubled = sks::exp_moment_stats(config, request);
  const double gap = std::fabs(base.mean - doubled.mean);
  const double slack = 3.0 * std::sqrt(base.se * base.se + doubled.se * doubled.se);
  const bool ok = std::isfinite(base.mean) && std::isfinite(doubled.mean) && gap <= slack;
  CHECK(ok);
  report(11, "exp moment finite, stable within 3 SE", ok,
         num(base.mean) + " vs " + num(doubled.mean) + " (kappa " + num(request.kappa) + ")");
}

TEST_CASE("criterion 12: time-regularity quotients stay level") {
  const sks::ExperimentConfig config;
  sks::HolderRequest request;
  request.elements = 64;
  request.steps = 8192;
  request.derivative_list = {0};
  request.q_list = {1.0};
  request.gap_list = {1, 2, 4, 8};
  request.offsets = 16;
  const std::vector<sks::HolderQuotient> table = sks::holder_quotients(config, request);
  REQUIRE(table.size() == 1);
  const std::vector<double>& per_gap = table.front().per_gap;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : per_gap) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const bool ok = lo > 0.0 && hi / lo <= 4.0;
  CHECK(ok);
  report(12, "L2 increment quotient spread <= 4x over gaps", ok, "spread " + num(hi / lo));
}

namespace {

int run_cli(const std::string& args) {
  const std::string command = "\"" + g_cli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("criterion 13: reproducibility and config contract of the binary") {
  REQUIRE_MESSAGE(!g_cli.empty(), "pass the sks binary path as an argument");
  const std::filesystem::path scratch = "acceptance-cli-scratch";
  std::filesystem::remove_all(scratch);
  std::filesystem::create_directories(scratch);
  const std::string base = (scratch / "").string();

  bool ok = true;
  std::string failure;
  const auto note = [&](bool pass, const std::string& what) {
    if (!pass && failure.empty()) failure = what;
    ok = ok && pass;
  };

  note(run_cli("--seed 7 simulate --N 32 --M 128 --out " + base + "sim-a") == 0 &&
           run_cli("--seed 7 simulate --N 32 --M 128 --out " + base + "sim-b") == 0,
       "simulate exits 0");
  const std::string traj = slurp(scratch / "sim-a" / "trajectory.csv");
  note(!traj.empty() && traj == slurp(scratch / "sim-b" / "trajectory.csv"),
       "trajectory CSVs byte-identical");
  note(slurp(scratch / "sim-a" / "manifest.json") == slurp(scratch / "sim-b" / "manifest.json"),
       "manifests byte-identical");

  const std::string sweep_args = "--seed 3 --mc 2 convergence-time --N 16 --M 16,32,64 --ref-M 512";
  note(run_cli(sweep_args + " --out " + base + "ct-a") == 0 &&
           run_cli(sweep_args + " --out " + base + "ct-b") == 0,
       "convergence-time exits 0");
  for (const char* file : {"raw_norms.csv", "rate_table.csv", "fits.csv"}) {
    const std::string first = slurp(scratch / "ct-a" / file);
    note(!first.empty() && first == slurp(scratch / "ct-b" / file),
         std::string(file) + " byte-identical");
  }

  note(run_cli("simulate --M 100 --out " + base + "bad-steps") == 2,
       "non-dyadic step count exits 2");
  note(run_cli("--r 3 simulate --N 16 --M 64 --out " + base + "bad-order") == 2,
       "spline order 3 exits 2");
  note(slurp(scratch / "bad-order" / "error.json").find("r >= 4") != std::string::npos,
       "order error cites the r >= 4 requirement");
  note(run_cli("--not-a-flag simulate --out " + base + "bad-flag") == 2, "unknown flag exits 2");

  const std::filesystem::path empty_config = scratch / "empty.ini";
  std::ofstream(empty_config).close();
  note(run_cli("--config " + empty_config.string() +
               " --seed 5 --nu 1 --L 6.283185307179586 --T 0.25 --r 4 --model sin --mc 1 " +
               "simulate --N 16 --M 32 --out " + base + "cfg") == 0,
       "empty config plus full flags exits 0");

  CHECK(ok);
  report(13, "byte-identical reruns, config errors exit 2", ok, failure);
}

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i)
    if (argv[i][0] != '-') {
      g_cli = argv[i];
      break;
    }
  doctest::Context context;
  context.applyCommandLine(argc, argv);
  return context.run();
}
