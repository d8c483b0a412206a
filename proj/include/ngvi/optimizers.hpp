#pragma once

#include <cstddef>
#include <utility>

#include "ngvi/gaussian.hpp"
#include "ngvi/gradients.hpp"

namespace ngvi {

// Maximum number of step-size halvings before a step that leaves Omega fails.
inline constexpr int kMaxHalvings = 20;

struct CviState {
  NaturalParams lam;
  std::size_t step_count = 0;
  // Step size actually applied by the last step (after any halving).
  double last_alpha = 0.0;
};

// lambda <- (1 - alpha) lambda + alpha (eta0 + likelihood_part), where
// likelihood_part is N * g~ (see likelihood_natural_gradient). A candidate
// outside Omega is retried with alpha halved, up to kMaxHalvings times, after
// which StepFailure carries the offending lambda2.
CviState cvi_step(const CviState& state, const NaturalParams& prior,
                  const FlatVec& likelihood_part, double alpha);

// Euclidean step lambda <- lambda + rho * grad, same rejection policy.
CviState sgd_nat_step(const CviState& state, const FlatVec& elbo_grad_lambda, double rho);

// Diagonal Gaussian in (mean, precision) form.
struct VognState {
  Vector mean;
  Vector precision;
  std::size_t step_count = 0;
  double last_alpha = 0.0;

  static VognState from_natural(const NaturalParams& lam);
  NaturalParams to_natural() const;
};

// Newton-like update for a diagonal q and an isotropic N(0, I/tau) prior:
//
//   P'  = (1 - alpha) P + alpha (tau - s * h)
//   m'  = m - alpha / P' * (tau m - s * g)
//
// with s = n_total / batch_size, g the batch-summed gradient and h the
// batch-summed (non-positive) Hessian diagonal. Precision is updated first and
// the mean step uses the new precision.
VognState vogn_step(const VognState& state, double tau, const Vector& batch_grad,
                    const Vector& batch_hess_diag, std::size_t n_total, std::size_t batch_size,
                    double alpha);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::size_t step_count = 0;
  AdamConfig config;

  static AdamState zeros(Index size, AdamConfig config);
};

// One bias-corrected Adam descent step on `params` with gradient `grad`.
std::pair<Vector, AdamState> adam_step(const Vector& params, const Vector& grad,
                                       const AdamState& state);

struct BbbParams {
  Vector mean;
  Vector rho;
};

// Adam on the stacked (mean, rho) vector, descending the negative ELBO.
std::pair<BbbParams, AdamState> bbb_adam_step(const BbbParams& params, const BbbGradient& grad,
                                              const AdamState& state);

class Schedule {
 public:
  enum class Kind { constant, decay };

  static Schedule constant(double alpha0);
  // alpha0 / (1 + gamma t)
  static Schedule decay(double alpha0, double gamma);

  Kind kind() const { return kind_; }
  double alpha0() const { return alpha0_; }
  double gamma() const { return gamma_; }

  double alpha(std::size_t t) const;

 private:
  Schedule(Kind kind, double alpha0, double gamma);
  Kind kind_;
  double alpha0_;
  double gamma_;
};

}  // namespace ngvi
