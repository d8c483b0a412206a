#include "ngvi/gradients.hpp"

#include <cmath>
#include <sstream>

#include "ngvi/errors.hpp"

namespace ngvi {

void EstimatorConfig::validate() const {
  if (n_mc < 1) throw ContractError("EstimatorConfig: n_mc must be at least 1");
}

namespace {

void require_model_dim(const LikelihoodModel& model, const NaturalParams& lam) {
  if (model.dim() != lam.dim()) {
    std::ostringstream msg;
    msg << "model " << model.name() << " has dimension " << model.dim()
        << " but q has dimension " << lam.dim();
    throw ContractError(msg.str());
  }
}

void require_compatible(const NaturalParams& a, const NaturalParams& b) {
  if (a.dim() != b.dim() || a.mode() != b.mode())
    throw ContractError("posterior and prior differ in dimension or covariance mode");
}

ExpectedGradHess batch_expectations(const LikelihoodModel& model, const NaturalParams& lam,
                                     const MomentParams& q, std::span<const Example> batch,
                                     const EstimatorConfig& cfg, Rng& rng) {
  const Index d = lam.dim();
  const CovarianceMode mode = lam.mode();
  Vector g = Vector::Zero(d);
  Vector h_diag = Vector::Zero(mode == CovarianceMode::diagonal ? d : 0);
  Matrix h_full = Matrix::Zero(mode == CovarianceMode::full ? d : 0, mode == CovarianceMode::full ? d : 0);

  if (cfg.expectation == ExpectationMode::exact) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const ExpectedTerms t = model.expected_terms(q, batch[i], cfg.hessian);
      if (!t.grad.allFinite()) throw EvaluationError("non-finite expected gradient", i);
      g += t.grad;
      if (mode == CovarianceMode::diagonal) {
        h_diag += t.hess.diag();
      } else {
        h_full += t.hess.matrix();
      }
    }
  } else {
    const std::vector<Vector> zs = sample(lam, cfg.n_mc, rng);
    for (std::size_t s = 0; s < zs.size(); ++s) {
      for (const Example& ex : batch) {
        if (mode == CovarianceMode::diagonal) {
          const GradHessSample gh = model.grad_hess(zs[s], ex, cfg.hessian);
          if (!gh.g.allFinite() || !gh.h_diag.allFinite())
            throw EvaluationError("non-finite gradient or Hessian at Monte-Carlo sample", s);
          g += gh.g;
          h_diag += gh.h_diag;
        } else {
          const Vector gi = model.grad(zs[s], ex);
          const Matrix hi = model.hessian(zs[s], ex, cfg.hessian);
          if (!gi.allFinite() || !hi.allFinite())
            throw EvaluationError("non-finite gradient or Hessian at Monte-Carlo sample", s);
          g += gi;
          h_full += hi;
        }
      }
    }
    const double inv = 1.0 / static_cast<double>(zs.size());
    g *= inv;
    h_diag *= inv;
    h_full *= inv;
  }
  return {std::move(g), mode == CovarianceMode::diagonal ? SymBlock::diagonal(std::move(h_diag))
                                                          : SymBlock::full(std::move(h_full))};
}

}  // namespace

ExpectedGradHess expected_grad_hess(const LikelihoodModel& model, const NaturalParams& lam,
                                    std::span<const Example> batch, const EstimatorConfig& cfg,
                                    Rng& rng) {
  cfg.validate();
  require_model_dim(model, lam);
  if (batch.empty()) return {Vector::Zero(lam.dim()), SymBlock::zero(lam.dim(), lam.mode())};
  return batch_expectations(model, lam, natural_to_moment(lam), batch, cfg, rng);
}

MuGradient estimate_mu_gradient(const LikelihoodModel& model, const NaturalParams& lam,
                                std::span<const Example> batch, const EstimatorConfig& cfg,
                                Rng& rng) {
  cfg.validate();
  require_model_dim(model, lam);
  if (batch.empty()) return {Vector::Zero(lam.dim()), SymBlock::zero(lam.dim(), lam.mode())};

  const MomentParams q = natural_to_moment(lam);
  const ExpectedGradHess e = batch_expectations(model, lam, q, batch, cfg, rng);
  return {e.grad - e.hess.apply(q.mean()), e.hess * 0.5};
}

FlatVec likelihood_natural_gradient(const LikelihoodModel& model, const NaturalParams& lam,
                                    std::span<const Example> batch, std::size_t n_total,
                                    const EstimatorConfig& cfg, Rng& rng) {
  if (n_total == 0) return FlatVec::Zero(lam.layout().size());
  if (batch.empty()) throw ContractError("likelihood_natural_gradient: empty batch with n_total > 0");
  const MuGradient mg = estimate_mu_gradient(model, lam, batch, cfg, rng);
  return (static_cast<double>(n_total) / static_cast<double>(batch.size())) * mg.flat();
}

FlatVec natural_gradient_elbo(const LikelihoodModel& model, const NaturalParams& lam,
                              const NaturalParams& prior, std::span<const Example> batch,
                              std::size_t n_total, const EstimatorConfig& cfg, Rng& rng) {
  require_compatible(lam, prior);
  return pack(prior) - pack(lam) + likelihood_natural_gradient(model, lam, batch, n_total, cfg, rng);
}

double elbo_value_mc(const LikelihoodModel& model, const NaturalParams& lam,
                     const NaturalParams& prior, std::span<const Example> data, std::size_t n_mc,
                     Rng& rng) {
  require_compatible(lam, prior);
  const double kl = kl_divergence(lam, prior);
  if (data.empty()) return -kl;
  if (n_mc < 1) throw ContractError("elbo_value_mc: n_mc must be at least 1");
  require_model_dim(model, lam);
  const std::vector<Vector> zs = sample(lam, n_mc, rng);
  double acc = 0.0;
  for (const Vector& z : zs) {
    for (const Example& ex : data) acc += model.log_lik(z, ex);
  }
  return acc / static_cast<double>(zs.size()) - kl;
}

double elbo_value_exact(const LikelihoodModel& model, const NaturalParams& lam,
                        const NaturalParams& prior, std::span<const Example> data) {
  require_compatible(lam, prior);
  const double kl = kl_divergence(lam, prior);
  if (data.empty()) return -kl;
  require_model_dim(model, lam);
  const MomentParams q = natural_to_moment(lam);
  double acc = 0.0;
  for (const Example& ex : data) acc += model.expected_terms(q, ex, HessianMode::exact).log_lik;
  return acc - kl;
}

NaturalParams bbb_to_natural(const Vector& mean, const Vector& rho) {
  if (mean.size() != rho.size()) throw ContractError("bbb_to_natural: mean/rho length mismatch");
  Vector var(rho.size());
  for (Index j = 0; j < rho.size(); ++j) {
    const double s = softplus(rho(j));
    var(j) = s * s;
  }
  return moment_to_natural(MomentParams::diagonal(mean, var));
}

BbbGradient bbb_gradient(const LikelihoodModel& model, const Vector& mean, const Vector& rho,
                         const NaturalParams& prior, std::span<const Example> batch,
                         std::size_t n_total, const EstimatorConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index d = mean.size();
  if (rho.size() != d || prior.dim() != d || model.dim() != d)
    throw ContractError("bbb_gradient: dimension mismatch");
  if (n_total > 0 && batch.empty()) throw ContractError("bbb_gradient: empty batch with n_total > 0");

  Vector sigma(d), dsigma_drho(d);
  for (Index j = 0; j < d; ++j) {
    sigma(j) = softplus(rho(j));
    dsigma_drho(j) = sigmoid(rho(j));
  }

  // KL(q || p) for diagonal q: 1/2 [sum_j P_jj s_j^2 + (m - mp)^T P (m - mp) - D + log det Vp - sum_j log s_j^2]
  const SymBlock prior_prec = prior.precision();
  const Vector prior_mean = natural_to_moment(prior).mean();
  Vector g_mean = prior_prec.apply(mean - prior_mean);
  Vector g_sigma = prior_prec.diagonal_entries().cwiseProduct(sigma) - sigma.cwiseInverse();

  if (n_total > 0) {
    const double scale = static_cast<double>(n_total) / static_cast<double>(batch.size());
    Vector lik_m = Vector::Zero(d);
    Vector lik_s = Vector::Zero(d);
    if (cfg.expectation == ExpectationMode::exact) {
      const MomentParams q = MomentParams::diagonal(mean, sigma.cwiseProduct(sigma));
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const ExpectedTerms t = model.expected_terms(q, batch[i], cfg.hessian);
        lik_m += t.grad;
        // Price: d/dsigma_j E[f] = sigma_j E[d^2 f / dz_j^2].
        lik_s += sigma.cwiseProduct(t.hess.diag());
      }
    } else {
      const NaturalParams q = bbb_to_natural(mean, rho);
      const Vector sd = natural_to_moment(q).cov().diag().cwiseSqrt();
      const std::vector<Vector> eps = standard_normal_draws(d, cfg.n_mc, rng);
      for (std::size_t s = 0; s < eps.size(); ++s) {
        const Vector z = mean + sd.cwiseProduct(eps[s]);
        for (const Example& ex : batch) {
          const Vector gi = model.grad(z, ex);
          if (!gi.allFinite()) throw EvaluationError("non-finite gradient at Monte-Carlo sample", s);
          lik_m += gi;
          lik_s += gi.cwiseProduct(eps[s]);
        }
      }
      const double inv = 1.0 / static_cast<double>(eps.size());
      lik_m *= inv;
      lik_s *= inv;
    }
    g_mean -= scale * lik_m;
    g_sigma -= scale * lik_s;
  }
  return {std::move(g_mean), g_sigma.cwiseProduct(dsigma_drho)};
}

FlatVec fd_gradient(const std::function<double(const FlatVec&)>& f, const FlatVec& x, double step) {
  if (!(step > 0.0)) throw ContractError("fd_gradient: step must be positive");
  FlatVec g(x.size());
  FlatVec probe = x;
  for (Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + step;
    const double up = f(probe);
    probe(k) = x(k) - step;
    const double down = f(probe);
    probe(k) = x(k);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw EvaluationError("fd_gradient: non-finite function value", static_cast<std::size_t>(k));
    g(k) = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace ngvi
