#include "ngvi/quadrature.hpp"

#include <stdexcept>

namespace ngvi {

GaussHermiteRule::GaussHermiteRule(int order) : nodes_(order), weights_(order) {
  if (order < 1) throw std::invalid_argument("GaussHermiteRule: order must be positive");
  constexpr double kEps = 1e-14;
  constexpr int kMaxIter = 50;
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const int n = order;
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * nodes_[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * nodes_[1];
    } else {
      z = 2.0 * z - nodes_[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < kMaxIter; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double prev = z;
      z = prev - p1 / pp;
      if (std::abs(z - prev) <= kEps * std::max(1.0, std::abs(z))) break;
    }
    nodes_[i] = z;
    nodes_[n - 1 - i] = -z;
    weights_[i] = weights_[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) nodes_[half - 1] = 0.0;
}

const GaussHermiteRule& GaussHermiteRule::standard() {
  static const GaussHermiteRule rule(100);
  return rule;
}

}  // namespace ngvi
