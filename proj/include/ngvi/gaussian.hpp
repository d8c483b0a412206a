#pragma once

// Gaussian exponential family in three coordinate systems:
//
//   moment       (m, V)
//   natural      lambda1 = V^-1 m,  lambda2 = -1/2 V^-1
//   expectation  mu1 = E[z] = m,    mu2 = E[z z^T] = m m^T + V
//
// Sufficient statistics phi(z) = (z, z z^T) and base measure
// h(z) = (2 pi)^(-D/2), so that
//
//   A(lambda) = -1/4 lambda1^T lambda2^-1 lambda1 - 1/2 log det(-2 lambda2)
//
// and q(z) = h(z) exp(phi(z)^T lambda - A(lambda)). With this convention the
// Hessian of A is exactly the Fisher information in lambda coordinates.
//
// Every type has a full (dense D x D) and a diagonal (length-D) form. The
// diagonal form is its own representation, not a masked dense matrix.

#include <cstddef>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ngvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

// Canonical flat encoding: first-order block followed by the packed
// second-order block (upper triangle, row-major, in full mode; the diagonal in
// diagonal mode).
using FlatVec = Eigen::VectorXd;

enum class CovarianceMode { full, diagonal };

const char* to_string(CovarianceMode mode);

// How off-diagonal entries of a symmetric block are written into a FlatVec.
//
// `plain` stores S_ij once (natural parameters, gradients with respect to mu).
// `doubled` stores 2 S_ij (expectation parameters, gradients with respect to
// lambda). The two are dual: <pack(A, plain), pack(B, doubled)> = tr(A B), so
// pack(mu, doubled) is exactly the gradient of A over pack(lambda, plain).
enum class SymPacking { plain, doubled };

struct FlatLayout {
  Index dim = 0;
  CovarianceMode mode = CovarianceMode::full;

  Index second_order_size() const {
    return mode == CovarianceMode::full ? dim * (dim + 1) / 2 : dim;
  }
  Index size() const { return dim + second_order_size(); }
};

// Symmetric second-order block, dense in full mode and a vector in diagonal
// mode. No positivity constraint; owners enforce their own invariants.
class SymBlock {
 public:
  static SymBlock full(Matrix m);
  static SymBlock diagonal(Vector d);
  static SymBlock zero(Index dim, CovarianceMode mode);

  CovarianceMode mode() const { return mode_; }
  Index dim() const { return mode_ == CovarianceMode::full ? dense_.rows() : diag_.size(); }

  // Valid only in the matching mode; throws ContractError otherwise.
  const Matrix& matrix() const;
  const Vector& diag() const;

  Matrix dense() const;
  Vector diagonal_entries() const;

  // y = S x
  Vector apply(const Vector& x) const;

  SymBlock operator*(double s) const;
  SymBlock operator+(const SymBlock& other) const;
  SymBlock operator-(const SymBlock& other) const;

 private:
  SymBlock(CovarianceMode mode, Matrix dense, Vector diag)
      : mode_(mode), dense_(std::move(dense)), diag_(std::move(diag)) {}

  CovarianceMode mode_ = CovarianceMode::full;
  Matrix dense_;
  Vector diag_;
};

class MomentParams {
 public:
  static MomentParams full(Vector mean, Matrix cov);
  static MomentParams diagonal(Vector mean, Vector var);
  // Throws DomainError unless cov is symmetric positive definite
  // (strictly positive entries in diagonal mode).
  static MomentParams make(Vector mean, SymBlock cov);

  Index dim() const { return mean_.size(); }
  CovarianceMode mode() const { return cov_.mode(); }
  const Vector& mean() const { return mean_; }
  const SymBlock& cov() const { return cov_; }

 private:
  MomentParams(Vector mean, SymBlock cov) : mean_(std::move(mean)), cov_(std::move(cov)) {}
  Vector mean_;
  SymBlock cov_;
};

class NaturalParams {
 public:
  // Throws DomainError unless -2 lambda2 is positive definite (lambda in Omega).
  static NaturalParams make(Vector lambda1, SymBlock lambda2);
  static bool in_domain(const Vector& lambda1, const SymBlock& lambda2);

  // N(0, I / tau) in natural form: {0, -tau/2 I}.
  static NaturalParams isotropic_prior(Index dim, double tau, CovarianceMode mode);

  Index dim() const { return lambda1_.size(); }
  CovarianceMode mode() const { return lambda2_.mode(); }
  FlatLayout layout() const { return {dim(), mode()}; }
  const Vector& lambda1() const { return lambda1_; }
  const SymBlock& lambda2() const { return lambda2_; }

  // -2 lambda2, i.e. V^-1.
  SymBlock precision() const { return lambda2_ * -2.0; }

 private:
  NaturalParams(Vector l1, SymBlock l2) : lambda1_(std::move(l1)), lambda2_(std::move(l2)) {}
  Vector lambda1_;
  SymBlock lambda2_;
};

class ExpectationParams {
 public:
  // Throws DomainError unless mu2 - mu1 mu1^T is positive definite.
  static ExpectationParams make(Vector mu1, SymBlock mu2);

  Index dim() const { return mu1_.size(); }
  CovarianceMode mode() const { return mu2_.mode(); }
  const Vector& mu1() const { return mu1_; }
  const SymBlock& mu2() const { return mu2_; }

 private:
  ExpectationParams(Vector mu1, SymBlock mu2) : mu1_(std::move(mu1)), mu2_(std::move(mu2)) {}
  Vector mu1_;
  SymBlock mu2_;
};

// --- flat encoding ---------------------------------------------------------

FlatVec pack(const Vector& first, const SymBlock& second, SymPacking packing);
void unpack(const FlatVec& flat, FlatLayout layout, SymPacking packing, Vector& first,
            SymBlock& second);

FlatVec pack(const NaturalParams& lam);         // plain
FlatVec pack(const ExpectationParams& mu);      // doubled
NaturalParams unpack_natural(const FlatVec& flat, FlatLayout layout);
ExpectationParams unpack_expectation(const FlatVec& flat, FlatLayout layout);

// --- conversions -----------------------------------------------------------

NaturalParams moment_to_natural(const MomentParams& p);
MomentParams natural_to_moment(const NaturalParams& lam);
ExpectationParams natural_to_expectation(const NaturalParams& lam);
NaturalParams expectation_to_natural(const ExpectationParams& mu);
MomentParams expectation_to_moment(const ExpectationParams& mu);
ExpectationParams moment_to_expectation(const MomentParams& p);

// --- scalar functionals ----------------------------------------------------

double log_partition(const NaturalParams& lam);

// Legendre conjugate A*(mu) = <lambda(mu), mu> - A(lambda(mu)).
double conjugate_log_partition(const ExpectationParams& mu);

double log_density(const NaturalParams& lam, const Vector& z);

// KL(q || p) in closed form. Throws ContractError on dimension/mode mismatch.
double kl_divergence(const NaturalParams& q, const NaturalParams& p);

// Fisher information in plain-packed lambda coordinates: the covariance of the
// doubled-packed sufficient statistics, computed from Gaussian fourth moments.
// Dense; intended for small D.
Matrix fisher_information(const NaturalParams& lam);

// F(lambda) v without forming F in diagonal mode (2x2 blocks per coordinate).
FlatVec fisher_vector_product(const NaturalParams& lam, const FlatVec& v);

// --- sampling --------------------------------------------------------------

// count x D standard normal draws, sample-major.
std::vector<Vector> standard_normal_draws(Index dim, std::size_t count, Rng& rng);

// z = m + L eps with L the Cholesky factor of V (jitter escalation applies).
std::vector<Vector> sample(const NaturalParams& lam, std::size_t count, Rng& rng);

// Debug view: (m, V) next to (lambda1, lambda2).
std::string describe(const NaturalParams& lam);
std::ostream& operator<<(std::ostream& os, const NaturalParams& lam);

}  // namespace ngvi
