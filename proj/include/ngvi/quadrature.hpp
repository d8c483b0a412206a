#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace ngvi {

// Gauss-Hermite rule for weight exp(-x^2), nodes found by Newton iteration on
// the normalised Hermite recurrence.
class GaussHermiteRule {
 public:
  explicit GaussHermiteRule(int order);

  // Shared rule of the default order (100), built once.
  static const GaussHermiteRule& standard();

  int order() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  // E[f(a)] for a ~ N(mean, var).
  template <class F>
  double expect_normal(F&& f, double mean, double var) const {
    const double scale = std::sqrt(2.0 * std::max(var, 0.0));
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(mean + scale * nodes_[i]);
    return acc / std::sqrt(std::numbers::pi);
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace ngvi
