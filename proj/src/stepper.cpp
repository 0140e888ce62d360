#include "sks/stepper.hpp"

#include <cmath>
#include <string>

namespace sks {

NewtonDivergence::NewtonDivergence(int64_t step, int iters, double res)
    : std::runtime_error("implicit solve diverged at step " + std::to_string(step) + " after " +
                         std::to_string(iters) + " iterations (residual " + std::to_string(res) +
                         ")"),
      step_index(step),
      iterations(iters),
      residual(res) {}

Stepper::Stepper(const SplineSpace& space, const Operators& ops, const DiffusionModel& model,
                 const SchemeParams& params)
    : space_(space),
      ops_(ops),
      model_(model),
      params_(params),
      implicit_part_(ops.mass),
      quad_work_(static_cast<size_t>(space.size()) * space.quadrature().size()),
      sload_(space.size()),
      rhs_(space.size()),
      f_(space.size()),
      f_trial_(space.size()),
      delta_(space.size()),
      conv_(space.size()),
      tmp_(space.size()),
      trial_(space.size()),
      jac_(space.size(), space.order() - 1),
      kmat_(space.size(), space.order() - 1) {
  const double k = params_.dt();
  implicit_part_.add_scaled(k * params_.viscosity, ops.bending);
  implicit_part_.add_scaled(-k, ops.gradient);
}

double Stepper::dual_norm(std::span<const double> v) {
  // sqrt(v^T M^{-1} v): the L2 norm of the Riesz representative of v.
  tmp_.assign(v.begin(), v.end());
  ops_.mass_solver->solve_in_place(tmp_);
  double s = 0.0;
  for (size_t i = 0; i < tmp_.size(); ++i) s += tmp_[i] * v[i];
  return std::sqrt(std::max(0.0, s));
}

void Stepper::residual(const Coefficients& c, const std::vector<double>& rhs,
                       std::vector<double>& f) {
  implicit_part_.apply(c, f);
  if (!params_.linearized) {
    convection(space_, c, conv_);
    const double k = params_.dt();
    for (size_t i = 0; i < f.size(); ++i) f[i] += k * conv_[i] - rhs[i];
  } else {
    for (size_t i = 0; i < f.size(); ++i) f[i] -= rhs[i];
  }
}

Coefficients Stepper::step(const Coefficients& state, double dw, int64_t step_index) {
  const int n = space_.size();
  const double k = params_.dt();

  // rhs = M c_n + dW * (b(v_n) - mean, B_i)
  diffusion_load(space_, model_, state, quad_work_, sload_);
  ops_.mass.apply(state, rhs_);
  for (int i = 0; i < n; ++i) rhs_[i] += dw * sload_[i];

  const double tol = params_.newton_tol * (1.0 + dual_norm(rhs_));

  Coefficients c = state;  // warm start
  residual(c, rhs_, f_);
  double fnorm = dual_norm(f_);
  last_stats_ = StepStats{};

  for (int iter = 0; iter < params_.newton_max_iter; ++iter) {
    if (params_.record_newton_history) last_stats_.history.push_back(fnorm);
    if (!std::isfinite(fnorm)) throw NewtonDivergence(step_index, iter, fnorm);
    if (fnorm <= tol) {
      last_stats_.iterations = iter;
      last_stats_.residual = fnorm;
      space_.remove_mean(c);
      return c;
    }

    kmat_ = implicit_part_;
    if (!params_.linearized) {
      convection_jacobian(space_, c, jac_);
      kmat_.add_scaled(k, jac_);
    }
    const LinearSolver solver(kmat_);
    for (int i = 0; i < n; ++i) delta_[i] = -f_[i];
    solver.solve_in_place(delta_);

    // Full step first; on insufficient residual decrease shrink the update.
    double lambda = 1.0;
    while (true) {
      for (int i = 0; i < n; ++i) trial_[i] = c[i] + lambda * delta_[i];
      residual(trial_, rhs_, f_trial_);
      const double ftrial = dual_norm(f_trial_);
      if (std::isfinite(ftrial) && (ftrial <= tol || ftrial <= (1.0 - 0.5 * lambda) * fnorm)) {
        c = trial_;
        f_ = f_trial_;
        fnorm = ftrial;
        break;
      }
      lambda *= params_.damping;
      last_stats_.damped = true;
      if (lambda < 1e-8) throw NewtonDivergence(step_index, iter + 1, ftrial);
    }
  }
  if (fnorm <= tol) {
    last_stats_.iterations = params_.newton_max_iter;
    last_stats_.residual = fnorm;
    space_.remove_mean(c);
    return c;
  }
  throw NewtonDivergence(step_index, params_.newton_max_iter, fnorm);
}

Trajectory Stepper::run(const Coefficients& initial, const WienerPath& path) {
  if (std::abs(path.horizon() - params_.horizon) > 1e-12 * std::max(1.0, params_.horizon))
    throw std::invalid_argument("run: path horizon does not match scheme horizon");
  const std::vector<double> dw = path.increments(params_.steps);
  Trajectory traj;
  traj.horizon = params_.horizon;
  traj.dt = params_.dt();
  traj.states.reserve(params_.steps + 1);
  traj.newton.reserve(params_.steps);
  traj.states.push_back(space_.zero_mean(initial));
  for (int64_t nstep = 0; nstep < params_.steps; ++nstep) {
    traj.states.push_back(step(traj.states.back(), dw[nstep], nstep));
    traj.newton.push_back(last_stats_);
  }
  return traj;
}

Coefficients initial_state(const SplineSpace& space, const Operators& ops,
                           const std::function<double(double)>& u0) {
  Coefficients c = l2_project(space, ops, u0);
  space.remove_mean(c);
  return c;
}

}  // namespace sks
