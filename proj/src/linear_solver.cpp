#include "sks/linear_solver.hpp"

#include <cmath>
#include <stdexcept>

namespace sks {

LinearSolver::LinearSolver(const PeriodicBandMatrix& m) : n_(m.size()), hw_(m.half_bandwidth()) {
  // The bordered scheme needs a banded core that is clearly larger than the
  // border; below that a dense LU is simpler and just as fast.
  const bool tiny = n_ < 3 * (2 * hw_ + 1) || hw_ == 0;
  if (tiny || !factor_banded(m)) factor_dense(m);
}

void LinearSolver::factor_dense(const PeriodicBandMatrix& m) {
  dense_path_ = true;
  Eigen::MatrixXd d(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) d(i, j) = m.get(i, j);
  dense_lu_.compute(d);
}

// Banded LU with partial pivoting of the core block, then the Schur
// complement of the trailing hw x hw border. Returns false if the core
// turns out singular (caller retries densely).
bool LinearSolver::factor_banded(const PeriodicBandMatrix& m) {
  const int b = hw_;
  nc_ = n_ - b;
  ldab_ = 3 * b + 1;  // kl + ku + 1 + kl rows, kl = ku = b
  ab_.assign(static_cast<size_t>(ldab_) * nc_, 0.0);
  ipiv_.assign(nc_, 0);

  // Core entries: |i-j| <= b with both indices < nc_. Column-major band
  // storage at row kl+ku+i-j = 2b+i-j.
  auto ab_at = [&](int i, int j) -> double& { return ab_[static_cast<size_t>(j) * ldab_ + (2 * b + i - j)]; };
  for (int j = 0; j < nc_; ++j)
    for (int i = std::max(0, j - b); i <= std::min(nc_ - 1, j + b); ++i) ab_at(i, j) = m.get(i, j);

  border_c_.setZero(b, nc_);
  Eigen::MatrixXd bb = Eigen::MatrixXd::Zero(nc_, b);
  Eigen::MatrixXd dd(b, b);
  for (int r = 0; r < b; ++r) {
    for (int j = 0; j < nc_; ++j) border_c_(r, j) = m.get(nc_ + r, j);
    for (int c = 0; c < b; ++c) dd(r, c) = m.get(nc_ + r, nc_ + c);
  }
  for (int i = 0; i < nc_; ++i)
    for (int c = 0; c < b; ++c) bb(i, c) = m.get(i, nc_ + c);

  // Factor the core: column sweep, pivot among the kl rows below the
  // diagonal, fill spreads into at most kl+ku columns to the right.
  const int kl = b, ku = b;
  for (int j = 0; j < nc_; ++j) {
    const int km = std::min(kl, nc_ - 1 - j);
    int p = 0;
    double best = std::abs(ab_[static_cast<size_t>(j) * ldab_ + (kl + ku)]);
    for (int i = 1; i <= km; ++i) {
      const double v = std::abs(ab_[static_cast<size_t>(j) * ldab_ + (kl + ku + i)]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) return false;
    ipiv_[j] = j + p;
    const int cmax = std::min(nc_ - 1, j + kl + ku);
    if (p != 0)
      for (int c = j; c <= cmax; ++c)
        std::swap(ab_[static_cast<size_t>(c) * ldab_ + (2 * b + j - c)],
                  ab_[static_cast<size_t>(c) * ldab_ + (2 * b + j + p - c)]);
    const double piv = ab_[static_cast<size_t>(j) * ldab_ + (kl + ku)];
    for (int i = 1; i <= km; ++i) {
      double& lij = ab_[static_cast<size_t>(j) * ldab_ + (kl + ku + i)];
      lij /= piv;
      for (int c = j + 1; c <= cmax; ++c)
        ab_[static_cast<size_t>(c) * ldab_ + (2 * b + j + i - c)] -=
            lij * ab_[static_cast<size_t>(c) * ldab_ + (2 * b + j - c)];
    }
  }

  // X = A_core^{-1} B and S = D - C X.
  core_inv_b_ = std::move(bb);
  for (int c = 0; c < hw_; ++c) solve_core(core_inv_b_.col(c).data());
  Eigen::MatrixXd schur = dd - border_c_ * core_inv_b_;
  schur_lu_.compute(schur);
  // A singular Schur block would silently produce garbage; detect via the
  // factorization's own diagonal.
  const auto& lu = schur_lu_.matrixLU();
  for (int i = 0; i < hw_; ++i)
    if (lu(i, i) == 0.0) return false;
  return true;
}

void LinearSolver::solve_core(double* v) const {
  const int kl = hw_, ku = hw_;
  for (int j = 0; j < nc_ - 1; ++j) {
    if (ipiv_[j] != j) std::swap(v[j], v[ipiv_[j]]);
    const int km = std::min(kl, nc_ - 1 - j);
    const double vj = v[j];
    for (int i = 1; i <= km; ++i) v[j + i] -= ab_[static_cast<size_t>(j) * ldab_ + (kl + ku + i)] * vj;
  }
  for (int j = nc_ - 1; j >= 0; --j) {
    double s = v[j];
    const int cmax = std::min(nc_ - 1, j + kl + ku);
    for (int c = j + 1; c <= cmax; ++c) s -= ab_[static_cast<size_t>(c) * ldab_ + (2 * hw_ + j - c)] * v[c];
    v[j] = s / ab_[static_cast<size_t>(j) * ldab_ + (kl + ku)];
  }
}

std::vector<double> LinearSolver::solve(std::span<const double> rhs) const {
  std::vector<double> x(rhs.begin(), rhs.end());
  solve_in_place(x);
  return x;
}

void LinearSolver::solve_in_place(std::span<double> x) const {
  if (static_cast<int>(x.size()) != n_) throw std::invalid_argument("solve: size mismatch");
  if (dense_path_) {
    Eigen::Map<Eigen::VectorXd> v(x.data(), n_);
    v = dense_lu_.solve(v.eval());
    return;
  }
  solve_core(x.data());
  Eigen::Map<Eigen::VectorXd> y1(x.data(), nc_);
  Eigen::Map<Eigen::VectorXd> y2(x.data() + nc_, hw_);
  y2 = schur_lu_.solve((y2 - border_c_ * y1).eval());
  y1 -= core_inv_b_ * y2;
}

}  // namespace sks
