#pragma once

#include <memory>
#include <string>

#include "ngvi/gaussian.hpp"

namespace ngvi {

// One data item D_i = (x_i, y_i). Binary targets are 0/1.
struct Example {
  Vector features;
  double target = 0.0;
};

enum class HessianMode {
  exact,
  // Squared per-example gradient, -g o g: first-order only and never positive.
  gauss_newton,
};

const char* to_string(HessianMode mode);

// Per-example gradient g_i(z) and Hessian diagonal H_i(z); rejects non-finite
// entries.
struct GradHessSample {
  Vector g;
  Vector h_diag;

  // Throws EvaluationError carrying `index` when any entry is not finite.
  static GradHessSample make(Vector g, Vector h_diag, std::size_t index = 0);
};

// Expectations under q of the log-likelihood, its gradient and its Hessian
// (dense in full mode, diagonal in diagonal mode).
struct ExpectedTerms {
  double log_lik = 0.0;
  Vector grad;
  SymBlock hess = SymBlock::zero(0, CovarianceMode::diagonal);
};

// p(D_i | z). Implementations are immutable and their evaluators pure.
class LikelihoodModel {
 public:
  virtual ~LikelihoodModel() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual bool is_binary() const = 0;

  virtual double log_lik(const Vector& z, const Example& ex) const = 0;
  virtual Vector grad(const Vector& z, const Example& ex) const = 0;

  // Probability of label 1. Binary models only.
  virtual double predict_prob(const Vector& z, const Vector& input) const = 0;

  Vector hess_diag(const Vector& z, const Example& ex, HessianMode mode) const;
  Matrix hessian(const Vector& z, const Example& ex, HessianMode mode) const;
  GradHessSample grad_hess(const Vector& z, const Example& ex, HessianMode mode) const;

  // Closed-form or quadrature expectations; only for models that advertise it.
  virtual bool has_exact_expectations() const { return false; }
  virtual ExpectedTerms expected_terms(const MomentParams& q, const Example& ex,
                                       HessianMode mode) const;

 protected:
  // Exact second derivatives; the defaults throw ContractError.
  virtual Vector exact_hess_diag(const Vector& z, const Example& ex) const;
  virtual Matrix exact_hessian(const Vector& z, const Example& ex) const;

  void check_input(const Vector& z, const Example& ex) const;
};

// y ~ N(z^T x, noise_var). The conjugate control case.
class LinearGaussianModel final : public LikelihoodModel {
 public:
  LinearGaussianModel(Index dim, double noise_var);

  std::string name() const override { return "linear_gaussian"; }
  Index dim() const override { return dim_; }
  bool is_binary() const override { return false; }
  double noise_var() const { return noise_var_; }

  double log_lik(const Vector& z, const Example& ex) const override;
  Vector grad(const Vector& z, const Example& ex) const override;
  double predict_prob(const Vector& z, const Vector& input) const override;

  bool has_exact_expectations() const override { return true; }
  ExpectedTerms expected_terms(const MomentParams& q, const Example& ex,
                               HessianMode mode) const override;

 protected:
  Vector exact_hess_diag(const Vector& z, const Example& ex) const override;
  Matrix exact_hessian(const Vector& z, const Example& ex) const override;

 private:
  Index dim_;
  double noise_var_;
};

// Bernoulli-logit GLM: p(y = 1 | z, x) = sigmoid(z^T x).
class LogisticModel final : public LikelihoodModel {
 public:
  explicit LogisticModel(Index dim);

  std::string name() const override { return "logistic"; }
  Index dim() const override { return dim_; }
  bool is_binary() const override { return true; }

  double log_lik(const Vector& z, const Example& ex) const override;
  Vector grad(const Vector& z, const Example& ex) const override;
  double predict_prob(const Vector& z, const Vector& input) const override;

  // The linear predictor a = z^T x is N(m^T x, x^T V x) under q, so every
  // expectation is a one-dimensional Gauss-Hermite integral.
  bool has_exact_expectations() const override { return true; }
  ExpectedTerms expected_terms(const MomentParams& q, const Example& ex,
                               HessianMode mode) const override;

 protected:
  Vector exact_hess_diag(const Vector& z, const Example& ex) const override;
  Matrix exact_hessian(const Vector& z, const Example& ex) const override;

 private:
  Index dim_;
};

struct MlpArchitecture {
  Index input_dim = 0;
  Index hidden_units = 0;

  // (input_dim + 1) * hidden_units weights+biases into the hidden layer, then
  // hidden_units + 1 for the output logit.
  Index param_dim() const { return (input_dim + 1) * hidden_units + hidden_units + 1; }
};

// Unpacked MLP weights. Packing order: w1 row-major (hidden x input), b1, w2, b2.
struct MlpParams {
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;

  static MlpParams decode(const MlpArchitecture& arch, const Vector& z);
  Vector encode() const;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
Vector mlp_init(const MlpArchitecture& arch, Rng& rng);

// One hidden ReLU layer, scalar logit, Bernoulli likelihood.
class MlpModel final : public LikelihoodModel {
 public:
  explicit MlpModel(MlpArchitecture arch);

  std::string name() const override { return "mlp"; }
  Index dim() const override { return arch_.param_dim(); }
  bool is_binary() const override { return true; }
  const MlpArchitecture& architecture() const { return arch_; }

  double logit(const Vector& z, const Vector& input) const;
  double log_lik(const Vector& z, const Example& ex) const override;
  // Reverse-mode backprop; ReLU derivative at exactly 0 is taken as 0.
  Vector grad(const Vector& z, const Example& ex) const override;
  double predict_prob(const Vector& z, const Vector& input) const override;

 private:
  MlpArchitecture arch_;
};

double sigmoid(double a);
// log(1 + e^a) without overflow.
double softplus(double a);
double inverse_softplus(double s);
// y*a - softplus(a): log p(y | logit a) for y in {0, 1}.
double bernoulli_logit_log_lik(double y, double a);

double predict_prob(const LikelihoodModel& model, const Vector& z, const Vector& input);

}  // namespace ngvi
