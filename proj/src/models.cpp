#include "ngvi/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ngvi/errors.hpp"
#include "ngvi/quadrature.hpp"

namespace ngvi {

const char* to_string(HessianMode mode) {
  return mode == HessianMode::exact ? "exact" : "gauss_newton";
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double softplus(double a) {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double inverse_softplus(double s) {
  if (!(s > 0.0)) throw DomainError("inverse_softplus: argument must be positive");
  return s + std::log(-std::expm1(-s));
}

double bernoulli_logit_log_lik(double y, double a) {
  // Written as -softplus(-/+a) for 0/1 labels to avoid cancellation when the
  // prediction is confident and correct.
  if (y == 1.0) return -softplus(-a);
  if (y == 0.0) return -softplus(a);
  return y * a - softplus(a);
}

double predict_prob(const LikelihoodModel& model, const Vector& z, const Vector& input) {
  return model.predict_prob(z, input);
}

GradHessSample GradHessSample::make(Vector g, Vector h_diag, std::size_t index) {
  if (!g.allFinite()) throw EvaluationError("non-finite per-example gradient", index);
  if (!h_diag.allFinite()) throw EvaluationError("non-finite per-example Hessian", index);
  return {std::move(g), std::move(h_diag)};
}

// --- LikelihoodModel -------------------------------------------------------

void LikelihoodModel::check_input(const Vector& z, const Example& ex) const {
  (void)ex;
  if (z.size() != dim()) {
    std::ostringstream msg;
    msg << name() << ": parameter vector has length " << z.size() << ", expected " << dim();
    throw ContractError(msg.str());
  }
}

Vector LikelihoodModel::hess_diag(const Vector& z, const Example& ex, HessianMode mode) const {
  if (mode == HessianMode::gauss_newton) {
    const Vector g = grad(z, ex);
    return -g.cwiseProduct(g);
  }
  return exact_hess_diag(z, ex);
}

Matrix LikelihoodModel::hessian(const Vector& z, const Example& ex, HessianMode mode) const {
  if (mode == HessianMode::gauss_newton) {
    const Vector g = grad(z, ex);
    return -g * g.transpose();
  }
  return exact_hessian(z, ex);
}

GradHessSample LikelihoodModel::grad_hess(const Vector& z, const Example& ex,
                                          HessianMode mode) const {
  Vector g = grad(z, ex);
  Vector h = mode == HessianMode::gauss_newton ? Vector(-g.cwiseProduct(g)) : exact_hess_diag(z, ex);
  return GradHessSample::make(std::move(g), std::move(h));
}

ExpectedTerms LikelihoodModel::expected_terms(const MomentParams&, const Example&,
                                              HessianMode) const {
  throw ContractError(name() + ": exact expectations are not available");
}

Vector LikelihoodModel::exact_hess_diag(const Vector&, const Example&) const {
  throw ContractError(name() + ": exact Hessian is not available");
}

Matrix LikelihoodModel::exact_hessian(const Vector&, const Example&) const {
  throw ContractError(name() + ": exact Hessian is not available");
}

namespace {

void check_features(const LikelihoodModel& model, const Vector& x) {
  if (x.size() != model.dim()) {
    std::ostringstream msg;
    msg << model.name() << ": feature vector has length " << x.size() << ", expected "
        << model.dim();
    throw ContractError(msg.str());
  }
}

// x^T V x for either covariance form.
double projected_variance(const MomentParams& q, const Vector& x) {
  if (q.mode() == CovarianceMode::diagonal) return x.cwiseProduct(x).dot(q.cov().diag());
  return x.dot(q.cov().matrix() * x);
}

SymBlock scaled_outer(const Vector& x, double s, CovarianceMode mode) {
  if (mode == CovarianceMode::diagonal) return SymBlock::diagonal(s * x.cwiseProduct(x));
  return SymBlock::full(s * x * x.transpose());
}

}  // namespace

// --- LinearGaussianModel ---------------------------------------------------

LinearGaussianModel::LinearGaussianModel(Index dim, double noise_var)
    : dim_(dim), noise_var_(noise_var) {
  if (dim < 1) throw ContractError("linear_gaussian: dimension must be positive");
  if (!(noise_var > 0.0)) throw ContractError("linear_gaussian: noise variance must be positive");
}

double LinearGaussianModel::log_lik(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  check_features(*this, ex.features);
  const double r = ex.target - z.dot(ex.features);
  return -0.5 * std::log(2.0 * std::numbers::pi * noise_var_) - 0.5 * r * r / noise_var_;
}

Vector LinearGaussianModel::grad(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  check_features(*this, ex.features);
  const double r = ex.target - z.dot(ex.features);
  return (r / noise_var_) * ex.features;
}

double LinearGaussianModel::predict_prob(const Vector&, const Vector&) const {
  throw ContractError("linear_gaussian: regression model has no label distribution");
}

Vector LinearGaussianModel::exact_hess_diag(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  return -ex.features.cwiseProduct(ex.features) / noise_var_;
}

Matrix LinearGaussianModel::exact_hessian(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  return -ex.features * ex.features.transpose() / noise_var_;
}

ExpectedTerms LinearGaussianModel::expected_terms(const MomentParams& q, const Example& ex,
                                                  HessianMode mode) const {
  check_input(q.mean(), ex);
  const Vector& x = ex.features;
  const double r = ex.target - q.mean().dot(x);
  const double s2 = projected_variance(q, x);
  const double sq = r * r + s2;  // E[(y - z^T x)^2]
  ExpectedTerms out;
  out.log_lik = -0.5 * std::log(2.0 * std::numbers::pi * noise_var_) - 0.5 * sq / noise_var_;
  out.grad = (r / noise_var_) * x;
  const double c = mode == HessianMode::exact ? -1.0 / noise_var_ : -sq / (noise_var_ * noise_var_);
  out.hess = scaled_outer(x, c, q.mode());
  return out;
}

// --- LogisticModel ---------------------------------------------------------

LogisticModel::LogisticModel(Index dim) : dim_(dim) {
  if (dim < 1) throw ContractError("logistic: dimension must be positive");
}

double LogisticModel::log_lik(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  check_features(*this, ex.features);
  return bernoulli_logit_log_lik(ex.target, z.dot(ex.features));
}

Vector LogisticModel::grad(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  check_features(*this, ex.features);
  return (ex.target - sigmoid(z.dot(ex.features))) * ex.features;
}

double LogisticModel::predict_prob(const Vector& z, const Vector& input) const {
  check_features(*this, input);
  return sigmoid(z.dot(input));
}

Vector LogisticModel::exact_hess_diag(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  const double s = sigmoid(z.dot(ex.features));
  return -s * (1.0 - s) * ex.features.cwiseProduct(ex.features);
}

Matrix LogisticModel::exact_hessian(const Vector& z, const Example& ex) const {
  check_input(z, ex);
  const double s = sigmoid(z.dot(ex.features));
  return -s * (1.0 - s) * ex.features * ex.features.transpose();
}

ExpectedTerms LogisticModel::expected_terms(const MomentParams& q, const Example& ex,
                                            HessianMode mode) const {
  check_input(q.mean(), ex);
  const Vector& x = ex.features;
  const double mean = q.mean().dot(x);
  const double var = projected_variance(q, x);
  const GaussHermiteRule& rule = GaussHermiteRule::standard();
  const double scale = std::sqrt(2.0 * var);
  double e_ll = 0.0, e_r = 0.0, e_h = 0.0;
  for (int k = 0; k < rule.order(); ++k) {
    const double a = mean + scale * rule.nodes()[k];
    const double w = rule.weights()[k];
    const double s = sigmoid(a);
    const double r = ex.target - s;
    e_ll += w * bernoulli_logit_log_lik(ex.target, a);
    e_r += w * r;
    e_h += w * (mode == HessianMode::exact ? -s * (1.0 - s) : -r * r);
  }
  const double norm = 1.0 / std::sqrt(std::numbers::pi);
  ExpectedTerms out;
  out.log_lik = norm * e_ll;
  out.grad = (norm * e_r) * x;
  out.hess = scaled_outer(x, norm * e_h, q.mode());
  return out;
}

// --- MLP -------------------------------------------------------------------

MlpParams MlpParams::decode(const MlpArchitecture& arch, const Vector& z) {
  if (z.size() != arch.param_dim()) throw ContractError("MlpParams::decode: wrong length");
  const Index h = arch.hidden_units, in = arch.input_dim;
  MlpParams p;
  p.w1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      z.data(), h, in);
  p.b1 = z.segment(h * in, h);
  p.w2 = z.segment(h * in + h, h);
  p.b2 = z(z.size() - 1);
  return p;
}

Vector MlpParams::encode() const {
  const Index h = w1.rows(), in = w1.cols();
  Vector z(h * in + 2 * h + 1);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(z.data(), h,
                                                                                      in) = w1;
  z.segment(h * in, h) = b1;
  z.segment(h * in + h, h) = w2;
  z(z.size() - 1) = b2;
  return z;
}

Vector mlp_init(const MlpArchitecture& arch, Rng& rng) {
  const Index h = arch.hidden_units, in = arch.input_dim;
  std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(static_cast<double>(in)),
                                            1.0 / std::sqrt(static_cast<double>(in)));
  std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(static_cast<double>(h)),
                                            1.0 / std::sqrt(static_cast<double>(h)));
  Vector z(arch.param_dim());
  for (Index k = 0; k < h * in + h; ++k) z(k) = u1(rng);
  for (Index k = h * in + h; k < z.size(); ++k) z(k) = u2(rng);
  return z;
}

MlpModel::MlpModel(MlpArchitecture arch) : arch_(arch) {
  if (arch.input_dim < 1 || arch.hidden_units < 1)
    throw ContractError("mlp: input_dim and hidden_units must be positive");
}

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

double MlpModel::logit(const Vector& z, const Vector& input) const {
  if (z.size() != dim()) throw ContractError("mlp: parameter vector has wrong length");
  if (input.size() != arch_.input_dim) throw ContractError("mlp: input has wrong length");
  const Index h = arch_.hidden_units, in = arch_.input_dim;
  const RowMajorMap w1(z.data(), h, in);
  const Vector pre = w1 * input + z.segment(h * in, h);
  return pre.cwiseMax(0.0).dot(z.segment(h * in + h, h)) + z(z.size() - 1);
}

double MlpModel::log_lik(const Vector& z, const Example& ex) const {
  return bernoulli_logit_log_lik(ex.target, logit(z, ex.features));
}

Vector MlpModel::grad(const Vector& z, const Example& ex) const {
  if (z.size() != dim()) throw ContractError("mlp: parameter vector has wrong length");
  if (ex.features.size() != arch_.input_dim) throw ContractError("mlp: input has wrong length");
  const Index h = arch_.hidden_units, in = arch_.input_dim;
  const RowMajorMap w1(z.data(), h, in);
  const Vector pre = w1 * ex.features + z.segment(h * in, h);
  const Vector act = pre.cwiseMax(0.0);
  const auto w2 = z.segment(h * in + h, h);
  const double f = act.dot(w2) + z(z.size() - 1);
  const double df = ex.target - sigmoid(f);

  Vector g(z.size());
  Vector dpre(h);
  for (Index k = 0; k < h; ++k) dpre(k) = pre(k) > 0.0 ? df * w2(k) : 0.0;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(g.data(), h,
                                                                                      in) =
      dpre * ex.features.transpose();
  g.segment(h * in, h) = dpre;
  g.segment(h * in + h, h) = df * act;
  g(g.size() - 1) = df;
  return g;
}

double MlpModel::predict_prob(const Vector& z, const Vector& input) const {
  return sigmoid(logit(z, input));
}

}  // namespace ngvi
