#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "sks/band_matrix.hpp"

namespace sks {

/// Direct factorization of a PeriodicBandMatrix for repeated solves.
///
/// Large systems use an LU of the leading (n-hw) banded block with partial
/// pivoting plus a dense Schur complement for the trailing hw rows/columns
/// that carry the periodic wrap-around. Small systems (where the band covers
/// most of the matrix) fall back to a dense LU; so does the rare case of a
/// singular leading block. Either path solves to machine precision and is
/// deterministic.
class LinearSolver {
 public:
  explicit LinearSolver(const PeriodicBandMatrix& m);

  [[nodiscard]] int size() const noexcept { return n_; }

  /// Solves A x = rhs. rhs.size() == size().
  [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const;

  /// In-place variant; x may alias rhs storage.
  void solve_in_place(std::span<double> x) const;

  /// True when the dense fallback was used instead of the banded path.
  [[nodiscard]] bool used_dense() const noexcept { return dense_path_; }

 private:
  void factor_dense(const PeriodicBandMatrix& m);
  bool factor_banded(const PeriodicBandMatrix& m);
  void solve_core(double* b) const;

  int n_ = 0;
  bool dense_path_ = false;

  // dense path
  Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;

  // banded path: core block (size nc_ = n - hw) in LAPACK-style band
  // storage with kl = ku = hw, row index kl+ku+i-j, plus border blocks.
  int hw_ = 0;
  int nc_ = 0;
  int ldab_ = 0;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
  Eigen::MatrixXd core_inv_b_;  // nc x hw, A_core^{-1} * B
  Eigen::MatrixXd border_c_;    // hw x nc
  Eigen::PartialPivLU<Eigen::MatrixXd> schur_lu_;
};

}  // namespace sks
