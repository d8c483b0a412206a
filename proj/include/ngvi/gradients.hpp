#pragma once

#include <functional>
#include <span>

#include "ngvi/gaussian.hpp"
#include "ngvi/models.hpp"

namespace ngvi {

enum class ExpectationMode {
  monte_carlo,
  // Sample-free expectations from LikelihoodModel::expected_terms.
  exact,
};

struct EstimatorConfig {
  std::size_t n_mc = 1;
  HessianMode hessian = HessianMode::exact;
  ExpectationMode expectation = ExpectationMode::monte_carlo;

  void validate() const;
};

// Gradient of sum_i E_q[log p(D_i | z)] with respect to the expectation
// parameters (mu1, mu2). g_mu2 is the symmetric matrix gradient.
struct MuGradient {
  Vector g_mu1;
  SymBlock g_mu2 = SymBlock::zero(0, CovarianceMode::diagonal);

  CovarianceMode mode() const { return g_mu2.mode(); }
  // Plain packing: a mu-gradient lives in lambda coordinates.
  FlatVec flat() const { return pack(g_mu1, g_mu2, SymPacking::plain); }
};

// Batch sums of E_q[g_i] and E_q[H_i]; Monte-Carlo mode shares cfg.n_mc
// samples across g, H and all examples. Diagonal H in diagonal mode.
struct ExpectedGradHess {
  Vector grad;
  SymBlock hess = SymBlock::zero(0, CovarianceMode::diagonal);
};

ExpectedGradHess expected_grad_hess(const LikelihoodModel& model, const NaturalParams& lam,
                                    std::span<const Example> batch, const EstimatorConfig& cfg,
                                    Rng& rng);

// Estimates, summed over the batch,
//
//   grad_mu1 = E[g] - E[H] m,   grad_mu2 = 1/2 E[H]
//
// with g, H the per-example gradient and Hessian and m the mean of `lam`.
// Monte-Carlo mode draws cfg.n_mc samples once and reuses them for g, H and
// every example in the batch. An empty batch yields zeros.
MuGradient estimate_mu_gradient(const LikelihoodModel& model, const NaturalParams& lam,
                                std::span<const Example> batch, const EstimatorConfig& cfg,
                                Rng& rng);

// (n_total / |batch|) * sum_{i in batch} g~_i(lam), flat. Zero when n_total == 0.
FlatVec likelihood_natural_gradient(const LikelihoodModel& model, const NaturalParams& lam,
                                    std::span<const Example> batch, std::size_t n_total,
                                    const EstimatorConfig& cfg, Rng& rng);

// eta0 - lam + (n_total / |batch|) * sum_{i in batch} g~_i(lam), flat.
FlatVec natural_gradient_elbo(const LikelihoodModel& model, const NaturalParams& lam,
                              const NaturalParams& prior, std::span<const Example> batch,
                              std::size_t n_total, const EstimatorConfig& cfg, Rng& rng);

// -KL(q || p) in closed form plus a Monte-Carlo estimate of the expected
// log-likelihood over `data` using n_mc samples of q.
double elbo_value_mc(const LikelihoodModel& model, const NaturalParams& lam,
                     const NaturalParams& prior, std::span<const Example> data, std::size_t n_mc,
                     Rng& rng);

// Same objective with sample-free expectations.
double elbo_value_exact(const LikelihoodModel& model, const NaturalParams& lam,
                        const NaturalParams& prior, std::span<const Example> data);

// Mean-field Gaussian with sigma = softplus(rho).
struct BbbGradient {
  Vector mean;
  Vector rho;
};

NaturalParams bbb_to_natural(const Vector& mean, const Vector& rho);

// Reparameterised gradient of the negative ELBO, with the likelihood term
// scaled by n_total / |batch|. Draws eps exactly as `sample` does for the same
// diagonal q, so finite differences of elbo_value_mc under the same seed
// reproduce it.
BbbGradient bbb_gradient(const LikelihoodModel& model, const Vector& mean, const Vector& rho,
                         const NaturalParams& prior, std::span<const Example> batch,
                         std::size_t n_total, const EstimatorConfig& cfg, Rng& rng);

// Central differences, one coordinate at a time. Throws EvaluationError with
// the coordinate index if f is not finite.
FlatVec fd_gradient(const std::function<double(const FlatVec&)>& f, const FlatVec& x, double step);

}  // namespace ngvi
