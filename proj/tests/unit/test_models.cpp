#include <cmath>
#include <limits>
#include <memory>

#include <gtest/gtest.h>

#include "ngvi/errors.hpp"
#include "ngvi/gaussian.hpp"
#include "ngvi/models.hpp"
#include "oracles.hpp"

using namespace ngvi;

namespace {

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1e-8, b.norm());
}

Example random_example(Index d, bool binary, oracle::Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  const Vector x = oracle::randn(d, rng);
  return {x, binary ? (coin(rng) ? 1.0 : 0.0) : oracle::randn(1, rng)(0)};
}

void check_gradient(const LikelihoodModel& model, const Vector& z, const Example& ex) {
  const Vector fd = oracle::fd_gradient([&](const Vector& v) { return model.log_lik(v, ex); }, z, 1e-6);
  EXPECT_LT(rel_err(model.grad(z, ex), fd), 1e-5) << model.name();
}

void check_exact_hessian(const LikelihoodModel& model, const Vector& z, const Example& ex) {
  const Matrix fd = oracle::fd_jacobian([&](const Vector& v) { return model.grad(v, ex); }, z, 1e-6);
  const Matrix h = model.hessian(z, ex, HessianMode::exact);
  EXPECT_LT((h - fd).norm() / std::max(1e-8, fd.norm()), 1e-5) << model.name();
  EXPECT_LT(rel_err(model.hess_diag(z, ex, HessianMode::exact), Vector(fd.diagonal())), 1e-5);
}

void check_gauss_newton(const LikelihoodModel& model, const Vector& z, const Example& ex) {
  const Vector g = model.grad(z, ex);
  const Vector h = model.hess_diag(z, ex, HessianMode::gauss_newton);
  EXPECT_EQ(h, Vector(-g.cwiseProduct(g)));
  EXPECT_TRUE((h.array() <= 0.0).all());
  const Matrix hf = model.hessian(z, ex, HessianMode::gauss_newton);
  EXPECT_LT((hf + g * g.transpose()).norm(), 1e-12);
}

}  // namespace

TEST(Scalars, SigmoidSoftplus) {
  EXPECT_NEAR(sigmoid(1.0), 0.7310585786300049, 1e-12);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-12);
  EXPECT_GT(softplus(-50.0), 0.0);
  for (double s : {1e-6, 0.3, 1.0, 7.5, 40.0}) EXPECT_NEAR(softplus(inverse_softplus(s)), s, 1e-12 * std::max(1.0, s));
  EXPECT_NEAR(bernoulli_logit_log_lik(1.0, 2.0), std::log(sigmoid(2.0)), 1e-14);
  EXPECT_NEAR(bernoulli_logit_log_lik(0.0, 2.0), std::log(1.0 - sigmoid(2.0)), 1e-14);
  EXPECT_TRUE(std::isfinite(bernoulli_logit_log_lik(0.0, 1000.0)));
}

TEST(GradHessSample, RejectsNonFinite) {
  Vector g = Vector::Ones(3);
  Vector h = -Vector::Ones(3);
  EXPECT_NO_THROW(GradHessSample::make(g, h));
  g(1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(GradHessSample::make(g, h, 4), EvaluationError);
  try {
    GradHessSample::make(g, h, 4);
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.index(), 4u);
  }
  EXPECT_THROW(GradHessSample::make(Vector::Ones(3), Vector::Constant(3, INFINITY)), EvaluationError);
}

TEST(LinearGaussian, DerivativesAt50Points) {
  oracle::Rng rng(1);
  const LinearGaussianModel model(4, 0.7);
  for (int k = 0; k < 50; ++k) {
    const Vector z = oracle::randn(4, rng);
    const Example ex = random_example(4, false, rng);
    check_gradient(model, z, ex);
    check_exact_hessian(model, z, ex);
    check_gauss_newton(model, z, ex);
  }
  EXPECT_THROW(model.predict_prob(Vector::Zero(4), Vector::Zero(4)), ContractError);
  EXPECT_FALSE(model.is_binary());
}

TEST(LinearGaussian, ConstantHessian) {
  const LinearGaussianModel model(2, 1.0);
  Vector x(2);
  x << 1.0, -2.0;
  const Example ex{x, 0.3};
  const Matrix h1 = model.hessian(Vector::Zero(2), ex, HessianMode::exact);
  const Matrix h2 = model.hessian(Vector::Constant(2, 5.0), ex, HessianMode::exact);
  EXPECT_EQ(h1, h2);
  EXPECT_LT((h1 + x * x.transpose()).norm(), 1e-15);
}

TEST(Logistic, DerivativesAt50Points) {
  oracle::Rng rng(2);
  const LogisticModel model(3);
  for (int k = 0; k < 50; ++k) {
    const Vector z = oracle::randn(3, rng);
    const Example ex = random_example(3, true, rng);
    check_gradient(model, z, ex);
    check_exact_hessian(model, z, ex);
    check_gauss_newton(model, z, ex);
    EXPECT_TRUE((model.hess_diag(z, ex, HessianMode::exact).array() <= 0.0).all());
  }
}

TEST(Logistic, PredictProbIsSigmoid) {
  const LogisticModel model(2);
  Vector z(2), x(2);
  z << 1.0, 0.5;
  x << 0.5, 1.0;
  EXPECT_NEAR(model.predict_prob(z, x), sigmoid(1.0), 1e-15);
  EXPECT_NEAR(predict_prob(model, z, x), sigmoid(1.0), 1e-15);
}

TEST(Logistic, DimensionMismatchIsContractError) {
  const LogisticModel model(2);
  EXPECT_THROW(model.log_lik(Vector::Zero(3), Example{Vector::Zero(2), 1.0}), ContractError);
  EXPECT_THROW(model.grad(Vector::Zero(2), Example{Vector::Zero(3), 1.0}), ContractError);
}

TEST(Mlp, LayoutAndRoundTrip) {
  const MlpArchitecture arch{3, 5};
  EXPECT_EQ(arch.param_dim(), 4 * 5 + 5 + 1);
  EXPECT_EQ(MlpArchitecture({14, 64}).param_dim(), 15 * 64 + 65);
  oracle::Rng rng(3);
  const Vector z = oracle::randn(arch.param_dim(), rng);
  EXPECT_EQ(MlpParams::decode(arch, z).encode(), z);
  const MlpParams p = MlpParams::decode(arch, z);
  EXPECT_EQ(p.w1(0, 1), z(1));  // row-major
  EXPECT_EQ(p.b2, z(arch.param_dim() - 1));
}

TEST(Mlp, InitRange) {
  const MlpArchitecture arch{4, 6};
  Rng rng(9);
  const MlpParams p = MlpParams::decode(arch, mlp_init(arch, rng));
  EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(4.0));
  EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(6.0));
}

TEST(Mlp, ForwardMatchesHandComputation) {
  const MlpArchitecture arch{2, 2};
  const MlpModel model(arch);
  MlpParams p;
  p.w1 = Matrix(2, 2);
  p.w1 << 1.0, -1.0, 0.5, 2.0;
  p.b1 = Vector(2);
  p.b1 << 0.0, -3.0;
  p.w2 = Vector(2);
  p.w2 << 2.0, 1.0;
  p.b2 = 0.25;
  Vector x(2);
  x << 1.0, 0.5;
  // hidden pre-activations: (0.5, -1.5) -> relu (0.5, 0); logit = 1 + 0.25
  EXPECT_NEAR(model.logit(p.encode(), x), 1.25, 1e-15);
  EXPECT_NEAR(model.predict_prob(p.encode(), x), sigmoid(1.25), 1e-15);
}

TEST(Mlp, GradientAt50Points) {
  oracle::Rng rng(4);
  const MlpModel model(MlpArchitecture{3, 6});
  for (int k = 0; k < 50; ++k) {
    const Vector z = oracle::randn(model.dim(), rng);
    const Example ex = random_example(3, true, rng);
    check_gradient(model, z, ex);
    check_gauss_newton(model, z, ex);
  }
  EXPECT_THROW(model.hess_diag(Vector::Zero(model.dim()), Example{Vector::Zero(3), 1.0}, HessianMode::exact),
               ContractError);
}

TEST(ExpectedTerms, LogisticMatchesIndependentQuadrature) {
  oracle::Rng rng(5);
  const LogisticModel model(2);
  const Matrix v = oracle::random_spd(2, rng);
  const Vector m = oracle::randn(2, rng);
  const MomentParams q = MomentParams::full(m, v);
  const Example ex = random_example(2, true, rng);
  const ExpectedTerms t = model.expected_terms(q, ex, HessianMode::exact);
  const Vector& x = ex.features;
  const double mean = m.dot(x), var = x.dot(v * x);
  const double sign = ex.target > 0.5 ? 1.0 : -1.0;
  const double ell = oracle::gh_expect([&](double a) { return oracle::log_sigmoid(sign * a); }, mean, var);
  const double eg = oracle::gh_expect([&](double a) { return ex.target - 1.0 / (1.0 + std::exp(-a)); }, mean, var);
  const double eh = oracle::gh_expect([&](double a) {
    const double s = 1.0 / (1.0 + std::exp(-a));
    return -s * (1.0 - s);
  }, mean, var);
  EXPECT_NEAR(t.log_lik, ell, 1e-10);
  EXPECT_LT(rel_err(t.grad, eg * x), 1e-10);
  EXPECT_LT((t.hess.matrix() - eh * x * x.transpose()).norm(), 1e-10);
}

TEST(ExpectedTerms, LinearGaussianMatchesMonteCarlo) {
  oracle::Rng rng(6);
  const LinearGaussianModel model(3, 0.5);
  const Matrix v = oracle::random_spd(3, rng);
  const Vector m = oracle::randn(3, rng);
  const Example ex = random_example(3, false, rng);
  const ExpectedTerms t = model.expected_terms(MomentParams::full(m, v), ex, HessianMode::exact);
  const std::size_t n = 200000;
  const Matrix l = v.llt().matrixL();
  double ll = 0.0;
  Vector g = Vector::Zero(3);
  Matrix gn = Matrix::Zero(3, 3);
  for (std::size_t s = 0; s < n; ++s) {
    const Vector z = m + l * oracle::randn(3, rng);
    ll += model.log_lik(z, ex);
    const Vector gi = model.grad(z, ex);
    g += gi;
    gn -= gi * gi.transpose();
  }
  EXPECT_NEAR(t.log_lik, ll / n, 2e-2 * std::abs(t.log_lik) + 1e-2);
  EXPECT_LT((t.grad - g / n).norm(), 3e-2 * std::max(1.0, t.grad.norm()));
  EXPECT_LT((t.hess.matrix() + ex.features * ex.features.transpose() / 0.5).norm(), 1e-12);
  const ExpectedTerms tg = model.expected_terms(MomentParams::full(m, v), ex, HessianMode::gauss_newton);
  EXPECT_LT((tg.hess.matrix() - gn / n).norm() / (gn / n).norm(), 2e-2);
}

TEST(ExpectedTerms, DiagonalModeGivesDiagonalHessian) {
  const LogisticModel model(3);
  const MomentParams q = MomentParams::diagonal(Vector::Zero(3), Vector::Ones(3));
  Vector x(3);
  x << 1.0, 2.0, -1.0;
  const ExpectedTerms t = model.expected_terms(q, Example{x, 1.0}, HessianMode::exact);
  EXPECT_EQ(t.hess.mode(), CovarianceMode::diagonal);
  EXPECT_EQ(t.hess.diag().size(), 3);
}

TEST(ExpectedTerms, MlpHasNone) {
  const MlpModel model(MlpArchitecture{2, 2});
  EXPECT_FALSE(model.has_exact_expectations());
  EXPECT_THROW(model.expected_terms(MomentParams::diagonal(Vector::Zero(model.dim()), Vector::Ones(model.dim())),
                                    Example{Vector::Zero(2), 1.0}, HessianMode::gauss_newton),
               ContractError);
}
