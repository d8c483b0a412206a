#include "ngvi/optimizers.hpp"

#include <cmath>
#include <sstream>

#include "ngvi/errors.hpp"

namespace ngvi {

namespace {

void require_step_size(double alpha, const char* who) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << who << ": step size " << alpha << " outside (0, 1]";
    throw ContractError(msg.str());
  }
}

// Accepts target(alpha) for the first alpha in {a, a/2, a/4, ...} that lands
// in Omega.
template <class Candidate>
CviState halving_step(const CviState& state, double alpha, Candidate&& candidate, const char* who) {
  const FlatLayout layout = state.lam.layout();
  Vector l1;
  SymBlock l2 = SymBlock::zero(0, layout.mode);
  double a = alpha;
  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, a *= 0.5) {
    unpack(candidate(a), layout, SymPacking::plain, l1, l2);
    if (NaturalParams::in_domain(l1, l2)) {
      return {NaturalParams::make(std::move(l1), std::move(l2)), state.step_count + 1, a};
    }
  }
  std::ostringstream msg;
  msg << who << ": lambda left Omega after " << kMaxHalvings << " halvings (step "
      << state.step_count << ")";
  throw StepFailure(msg.str(), pack(Vector::Zero(layout.dim), l2, SymPacking::plain).tail(
                                   layout.second_order_size()));
}

}  // namespace

CviState cvi_step(const CviState& state, const NaturalParams& prior,
                  const FlatVec& likelihood_part, double alpha) {
  require_step_size(alpha, "cvi_step");
  const FlatLayout layout = state.lam.layout();
  if (prior.dim() != layout.dim || prior.mode() != layout.mode)
    throw ContractError("cvi_step: prior and state differ in dimension or mode");
  if (likelihood_part.size() != layout.size())
    throw ContractError("cvi_step: likelihood part has the wrong length");

  const FlatVec current = pack(state.lam);
  const FlatVec target = pack(prior) + likelihood_part;
  return halving_step(
      state, alpha, [&](double a) -> FlatVec { return (1.0 - a) * current + a * target; },
      "cvi_step");
}

CviState sgd_nat_step(const CviState& state, const FlatVec& elbo_grad_lambda, double rho) {
  if (!(rho > 0.0)) throw ContractError("sgd_nat_step: step size must be positive");
  if (elbo_grad_lambda.size() != state.lam.layout().size())
    throw ContractError("sgd_nat_step: gradient has the wrong length");
  const FlatVec current = pack(state.lam);
  return halving_step(
      state, rho, [&](double a) -> FlatVec { return current + a * elbo_grad_lambda; },
      "sgd_nat_step");
}

VognState VognState::from_natural(const NaturalParams& lam) {
  if (lam.mode() != CovarianceMode::diagonal)
    throw ContractError("VognState: requires a diagonal Gaussian");
  const Vector prec = -2.0 * lam.lambda2().diag();
  return {lam.lambda1().cwiseQuotient(prec), prec, 0, 0.0};
}

NaturalParams VognState::to_natural() const {
  return NaturalParams::make(precision.cwiseProduct(mean), SymBlock::diagonal(-0.5 * precision));
}

VognState vogn_step(const VognState& state, double tau, const Vector& batch_grad,
                    const Vector& batch_hess_diag, std::size_t n_total, std::size_t batch_size,
                    double alpha) {
  require_step_size(alpha, "vogn_step");
  if (!(tau > 0.0)) throw ContractError("vogn_step: tau must be positive");
  if (batch_size == 0) throw ContractError("vogn_step: batch_size must be positive");
  const Index d = state.mean.size();
  if (state.precision.size() != d || batch_grad.size() != d || batch_hess_diag.size() != d)
    throw ContractError("vogn_step: dimension mismatch");
  for (Index j = 0; j < d; ++j) {
    if (batch_hess_diag(j) > 0.0) {
      std::ostringstream msg;
      msg << "vogn_step: Hessian entry " << j << " is positive (" << batch_hess_diag(j)
          << "); the Gauss-Newton contract requires h <= 0";
      throw ContractError(msg.str());
    }
  }
  if (!(state.precision.array() > 0.0).all())
    throw ContractError("vogn_step: state precision must be strictly positive");

  const double s = static_cast<double>(n_total) / static_cast<double>(batch_size);
  VognState next;
  next.precision = (1.0 - alpha) * state.precision +
                   alpha * (Vector::Constant(d, tau) - s * batch_hess_diag);
  next.mean = state.mean - alpha * (tau * state.mean - s * batch_grad).cwiseQuotient(next.precision);
  next.step_count = state.step_count + 1;
  next.last_alpha = alpha;
  if (!(next.precision.array() > 0.0).all() || !next.mean.allFinite())
    throw StepFailure("vogn_step: precision lost positivity", -0.5 * next.precision);
  return next;
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("Adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("Adam: beta1 and beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("Adam: epsilon must be positive");
}

AdamState AdamState::zeros(Index size, AdamConfig config) {
  config.validate();
  return {Vector::Zero(size), Vector::Zero(size), 0, config};
}

std::pair<Vector, AdamState> adam_step(const Vector& params, const Vector& grad,
                                       const AdamState& state) {
  state.config.validate();
  if (params.size() != grad.size() || grad.size() != state.first_moment.size())
    throw ContractError("adam_step: dimension mismatch");
  const AdamConfig& c = state.config;
  AdamState next = state;
  next.step_count = state.step_count + 1;
  next.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grad;
  next.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(next.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const Eigen::ArrayXd m_hat = next.first_moment.array() / bc1;
  const Eigen::ArrayXd v_hat = next.second_moment.array() / bc2;
  Vector updated = params.array() - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
  return {std::move(updated), std::move(next)};
}

std::pair<BbbParams, AdamState> bbb_adam_step(const BbbParams& params, const BbbGradient& grad,
                                              const AdamState& state) {
  const Index d = params.mean.size();
  if (params.rho.size() != d || grad.mean.size() != d || grad.rho.size() != d)
    throw ContractError("bbb_adam_step: dimension mismatch");
  Vector stacked(2 * d), g(2 * d);
  stacked << params.mean, params.rho;
  g << grad.mean, grad.rho;
  auto [updated, next] = adam_step(stacked, g, state);
  return {BbbParams{updated.head(d), updated.tail(d)}, std::move(next)};
}

Schedule::Schedule(Kind kind, double alpha0, double gamma) : kind_(kind), alpha0_(alpha0), gamma_(gamma) {
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw ContractError("Schedule: alpha0 must lie in (0, 1]");
  if (!(gamma >= 0.0)) throw ContractError("Schedule: decay rate must be non-negative");
}

Schedule Schedule::constant(double alpha0) { return Schedule(Kind::constant, alpha0, 0.0); }

Schedule Schedule::decay(double alpha0, double gamma) { return Schedule(Kind::decay, alpha0, gamma); }

double Schedule::alpha(std::size_t t) const {
  if (kind_ == Kind::constant) return alpha0_;
  return alpha0_ / (1.0 + gamma_ * static_cast<double>(t));
}

}  // namespace ngvi
