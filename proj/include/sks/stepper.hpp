#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sks/assembly.hpp"
#include "sks/noise.hpp"
#include "sks/spline.hpp"

namespace sks {

/// Time-discretization parameters of the implicit scheme.
struct SchemeParams {
  double viscosity = 1.0;  // fourth-order coefficient
  double horizon = 0.25;   // final time T
  int64_t steps = 256;     // number of time steps M
  double newton_tol = 1e-10;
  int newton_max_iter = 30;
  double damping = 0.5;     // shrink factor of the residual line search
  bool linearized = false;  // diagnostic mode: drop the transport term
  bool record_newton_history = false;  // keep per-iteration residuals in StepStats

  [[nodiscard]] double dt() const noexcept { return horizon / static_cast<double>(steps); }
};

/// Convergence record of one implicit solve.
struct StepStats {
  int iterations = 0;
  double residual = 0.0;
  bool damped = false;
  std::vector<double> history;  // residual before each iteration; only kept on request
};

/// Raised when the implicit solve fails; callers decide whether a whole
/// experiment aborts, so the failing step is carried along.
class NewtonDivergence : public std::runtime_error {
 public:
  NewtonDivergence(int64_t step_index, int iterations, double residual);

  int64_t step_index;
  int iterations;
  double residual;
};

/// States of one realization on the full time grid: states[n] holds the
/// coefficients at time n*dt, n = 0..steps. All states have zero mean.
struct Trajectory {
  std::vector<Coefficients> states;
  std::vector<StepStats> newton;
  double horizon = 0.0;
  double dt = 0.0;
};

/// One-step map of the fully implicit scheme
///
///   (c_next - c, B_i) + dt*nu*(v_next'', B_i'') - dt*(v_next', B_i')
///     + dt*(v_next v_next', B_i)  =  dW * (b(v) - mean, B_i),
///
/// solved by a damped Newton iteration on the coefficient residual with the
/// exact transport Jacobian. Residuals are measured in the norm dual to L2
/// (mass-inverse), so the tolerance is mesh-independent.
class Stepper {
 public:
  Stepper(const SplineSpace& space, const Operators& ops, const DiffusionModel& model,
          const SchemeParams& params);

  [[nodiscard]] const SchemeParams& params() const noexcept { return params_; }

  /// Advances one step from `state` with noise increment dw. Returns the new
  /// zero-mean state; throws NewtonDivergence (tagged with `step_index`) if
  /// the iteration fails.
  [[nodiscard]] Coefficients step(const Coefficients& state, double dw, int64_t step_index = -1);

  [[nodiscard]] const StepStats& last_step_stats() const noexcept { return last_stats_; }

  /// Runs the scheme over the whole horizon, reading params().steps
  /// increments from the path (path horizon must match).
  [[nodiscard]] Trajectory run(const Coefficients& initial, const WienerPath& path);

 private:
  [[nodiscard]] double dual_norm(std::span<const double> v);
  void residual(const Coefficients& c, const std::vector<double>& rhs, std::vector<double>& f);

  const SplineSpace& space_;
  const Operators& ops_;
  DiffusionModel model_;
  SchemeParams params_;
  PeriodicBandMatrix implicit_part_;  // mass + dt*nu*bending - dt*gradient
  StepStats last_stats_;

  // reusable workspaces
  std::vector<double> quad_work_, sload_, rhs_, f_, f_trial_, delta_, conv_, tmp_;
  Coefficients trial_;
  PeriodicBandMatrix jac_, kmat_;
};

/// Projects the initial condition into the space and removes its mean.
[[nodiscard]] Coefficients initial_state(const SplineSpace& space, const Operators& ops,
                                         const std::function<double(double)>& u0);

}  // namespace sks
