#pragma once

#include <vector>

namespace sks {

/// Gauss-Legendre rule on the unit interval [0,1].
///
/// Nodes are strictly increasing in (0,1), weights are positive and sum to
/// one, and the rule integrates polynomials up to degree `exactness()`
/// exactly. Element integrals on [a, a+h] are evaluated by the affine map
/// x = a + h*node, weight h*w.
class QuadratureRule {
 public:
  /// Builds the n-point Gauss-Legendre rule (exact through degree 2n-1).
  static QuadratureRule gauss_legendre(int points);

  [[nodiscard]] int size() const noexcept { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] int exactness() const noexcept { return exactness_; }
  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  QuadratureRule(std::vector<double> nodes, std::vector<double> weights, int exactness)
      : nodes_(std::move(nodes)), weights_(std::move(weights)), exactness_(exactness) {}

  std::vector<double> nodes_;
  std::vector<double> weights_;
  int exactness_ = 0;
};

}  // namespace sks
