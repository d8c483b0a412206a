#include "ngvi/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ngvi/errors.hpp"
#include "ngvi/linalg.hpp"

namespace ngvi {

namespace {

void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw ContractError(msg.str());
  }
}

Matrix symmetrized(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ContractError(std::string(what) + ": matrix is not square");
  if (m.size() == 0) return m;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!(asym <= 1e-8 * scale)) throw ContractError(std::string(what) + ": matrix is not symmetric");
  return 0.5 * (m + m.transpose());
}

std::string first_nonpositive(const Vector& v, const char* what) {
  std::ostringstream msg;
  for (Index j = 0; j < v.size(); ++j) {
    if (!(v(j) > 0.0) || !std::isfinite(v(j))) {
      msg << what << ": entry " << j << " is " << v(j) << ", must be strictly positive";
      return msg.str();
    }
  }
  return {};
}

void check_positive(const SymBlock& s, const char* what) {
  if (s.mode() == CovarianceMode::diagonal) {
    const std::string err = first_nonpositive(s.diag(), what);
    if (!err.empty()) throw DomainError(err);
    return;
  }
  if (!is_positive_definite(s.matrix())) {
    std::ostringstream msg;
    msg << what << ": not positive definite (smallest eigenvalue " << min_eigenvalue(s.matrix())
        << ")";
    throw DomainError(msg.str());
  }
}

// (mean, covariance) of a valid natural parameter, solving with the precision
// factor rather than forming V first.
struct MeanCov {
  Vector mean;
  SymBlock cov;
};

MeanCov mean_cov(const NaturalParams& lam) {
  if (lam.mode() == CovarianceMode::diagonal) {
    const Vector prec = -2.0 * lam.lambda2().diag();
    Vector var = prec.cwiseInverse();
    Vector mean = lam.lambda1().cwiseProduct(var);
    return {std::move(mean), SymBlock::diagonal(std::move(var))};
  }
  const Matrix prec = -2.0 * lam.lambda2().matrix();
  const Matrix l = cholesky_with_jitter(prec, "precision -2*lambda2");
  const auto tri = l.triangularView<Eigen::Lower>();
  Vector mean = tri.transpose().solve(tri.solve(lam.lambda1()));
  const Matrix linv = tri.solve(Matrix::Identity(prec.rows(), prec.cols()));
  Matrix cov = linv.transpose() * linv;
  cov = 0.5 * (cov + cov.transpose());
  return {std::move(mean), SymBlock::full(std::move(cov))};
}

}  // namespace

const char* to_string(CovarianceMode mode) {
  return mode == CovarianceMode::full ? "full" : "diagonal";
}

// --- SymBlock --------------------------------------------------------------

SymBlock SymBlock::full(Matrix m) {
  return SymBlock(CovarianceMode::full, symmetrized(m, "SymBlock"), Vector());
}

SymBlock SymBlock::diagonal(Vector d) { return SymBlock(CovarianceMode::diagonal, Matrix(), std::move(d)); }

SymBlock SymBlock::zero(Index dim, CovarianceMode mode) {
  return mode == CovarianceMode::full ? full(Matrix::Zero(dim, dim)) : diagonal(Vector::Zero(dim));
}

const Matrix& SymBlock::matrix() const {
  if (mode_ != CovarianceMode::full) throw ContractError("SymBlock::matrix on a diagonal block");
  return dense_;
}

const Vector& SymBlock::diag() const {
  if (mode_ != CovarianceMode::diagonal) throw ContractError("SymBlock::diag on a full block");
  return diag_;
}

Matrix SymBlock::dense() const {
  return mode_ == CovarianceMode::full ? dense_ : Matrix(diag_.asDiagonal());
}

Vector SymBlock::diagonal_entries() const {
  return mode_ == CovarianceMode::full ? Vector(dense_.diagonal()) : diag_;
}

Vector SymBlock::apply(const Vector& x) const {
  require_same_dim(dim(), x.size(), "SymBlock::apply");
  return mode_ == CovarianceMode::full ? Vector(dense_ * x) : Vector(diag_.cwiseProduct(x));
}

SymBlock SymBlock::operator*(double s) const { return SymBlock(mode_, dense_ * s, diag_ * s); }

SymBlock SymBlock::operator+(const SymBlock& other) const {
  if (mode_ != other.mode_) throw ContractError("SymBlock: mode mismatch");
  require_same_dim(dim(), other.dim(), "SymBlock::operator+");
  return SymBlock(mode_, dense_ + other.dense_, diag_ + other.diag_);
}

SymBlock SymBlock::operator-(const SymBlock& other) const { return *this + other * -1.0; }

// --- parameter types -------------------------------------------------------

MomentParams MomentParams::full(Vector mean, Matrix cov) {
  return make(std::move(mean), SymBlock::full(std::move(cov)));
}

MomentParams MomentParams::diagonal(Vector mean, Vector var) {
  return make(std::move(mean), SymBlock::diagonal(std::move(var)));
}

MomentParams MomentParams::make(Vector mean, SymBlock cov) {
  require_same_dim(mean.size(), cov.dim(), "MomentParams");
  if (!mean.allFinite()) throw DomainError("MomentParams: mean has non-finite entries");
  check_positive(cov, "MomentParams covariance");
  return MomentParams(std::move(mean), std::move(cov));
}

bool NaturalParams::in_domain(const Vector& lambda1, const SymBlock& lambda2) {
  if (lambda1.size() != lambda2.dim() || !lambda1.allFinite()) return false;
  if (lambda2.mode() == CovarianceMode::diagonal) {
    const Vector& d = lambda2.diag();
    return d.allFinite() && (d.array() < 0.0).all();
  }
  return is_positive_definite(-2.0 * lambda2.matrix());
}

NaturalParams NaturalParams::make(Vector lambda1, SymBlock lambda2) {
  require_same_dim(lambda1.size(), lambda2.dim(), "NaturalParams");
  if (!lambda1.allFinite()) throw DomainError("NaturalParams: lambda1 has non-finite entries");
  check_positive(lambda2 * -2.0, "NaturalParams -2*lambda2");
  return NaturalParams(std::move(lambda1), std::move(lambda2));
}

NaturalParams NaturalParams::isotropic_prior(Index dim, double tau, CovarianceMode mode) {
  if (!(tau > 0.0)) throw DomainError("isotropic prior: tau must be positive");
  const SymBlock l2 = mode == CovarianceMode::full
                          ? SymBlock::full(Matrix::Identity(dim, dim) * (-0.5 * tau))
                          : SymBlock::diagonal(Vector::Constant(dim, -0.5 * tau));
  return make(Vector::Zero(dim), l2);
}

ExpectationParams ExpectationParams::make(Vector mu1, SymBlock mu2) {
  require_same_dim(mu1.size(), mu2.dim(), "ExpectationParams");
  if (!mu1.allFinite()) throw DomainError("ExpectationParams: mu1 has non-finite entries");
  const SymBlock outer = mu2.mode() == CovarianceMode::full
                             ? SymBlock::full(mu1 * mu1.transpose())
                             : SymBlock::diagonal(mu1.cwiseProduct(mu1));
  check_positive(mu2 - outer, "ExpectationParams mu2 - mu1 mu1^T");
  return ExpectationParams(std::move(mu1), std::move(mu2));
}

// --- flat encoding ---------------------------------------------------------

FlatVec pack(const Vector& first, const SymBlock& second, SymPacking packing) {
  require_same_dim(first.size(), second.dim(), "pack");
  const FlatLayout layout{first.size(), second.mode()};
  FlatVec out(layout.size());
  out.head(layout.dim) = first;
  if (second.mode() == CovarianceMode::diagonal) {
    out.tail(layout.dim) = second.diag();
    return out;
  }
  const Matrix& s = second.matrix();
  const double off = packing == SymPacking::doubled ? 2.0 : 1.0;
  Index k = layout.dim;
  for (Index i = 0; i < layout.dim; ++i) {
    for (Index j = i; j < layout.dim; ++j) out(k++) = (i == j ? 1.0 : off) * s(i, j);
  }
  return out;
}

void unpack(const FlatVec& flat, FlatLayout layout, SymPacking packing, Vector& first,
            SymBlock& second) {
  if (flat.size() != layout.size()) {
    std::ostringstream msg;
    msg << "unpack: flat vector has length " << flat.size() << ", layout needs " << layout.size();
    throw ContractError(msg.str());
  }
  const Index d = layout.dim;
  first = flat.head(d);
  if (layout.mode == CovarianceMode::diagonal) {
    second = SymBlock::diagonal(flat.tail(d));
    return;
  }
  const double off = packing == SymPacking::doubled ? 0.5 : 1.0;
  Matrix s(d, d);
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) {
      const double v = (i == j ? 1.0 : off) * flat(k++);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  second = SymBlock::full(std::move(s));
}

FlatVec pack(const NaturalParams& lam) {
  return pack(lam.lambda1(), lam.lambda2(), SymPacking::plain);
}

FlatVec pack(const ExpectationParams& mu) { return pack(mu.mu1(), mu.mu2(), SymPacking::doubled); }

NaturalParams unpack_natural(const FlatVec& flat, FlatLayout layout) {
  Vector l1;
  SymBlock l2 = SymBlock::zero(0, layout.mode);
  unpack(flat, layout, SymPacking::plain, l1, l2);
  return NaturalParams::make(std::move(l1), std::move(l2));
}

ExpectationParams unpack_expectation(const FlatVec& flat, FlatLayout layout) {
  Vector m1;
  SymBlock m2 = SymBlock::zero(0, layout.mode);
  unpack(flat, layout, SymPacking::doubled, m1, m2);
  return ExpectationParams::make(std::move(m1), std::move(m2));
}

// --- conversions -----------------------------------------------------------

NaturalParams moment_to_natural(const MomentParams& p) {
  if (p.mode() == CovarianceMode::diagonal) {
    const Vector prec = p.cov().diag().cwiseInverse();
    return NaturalParams::make(prec.cwiseProduct(p.mean()), SymBlock::diagonal(-0.5 * prec));
  }
  const Matrix prec = spd_inverse(p.cov().matrix(), "covariance");
  return NaturalParams::make(prec * p.mean(), SymBlock::full(-0.5 * prec));
}

MomentParams natural_to_moment(const NaturalParams& lam) {
  MeanCov mc = mean_cov(lam);
  return MomentParams::make(std::move(mc.mean), std::move(mc.cov));
}

ExpectationParams moment_to_expectation(const MomentParams& p) {
  const Vector& m = p.mean();
  if (p.mode() == CovarianceMode::diagonal) {
    return ExpectationParams::make(m, SymBlock::diagonal(m.cwiseProduct(m) + p.cov().diag()));
  }
  return ExpectationParams::make(m, SymBlock::full(m * m.transpose() + p.cov().matrix()));
}

ExpectationParams natural_to_expectation(const NaturalParams& lam) {
  return moment_to_expectation(natural_to_moment(lam));
}

MomentParams expectation_to_moment(const ExpectationParams& mu) {
  const Vector& m = mu.mu1();
  if (mu.mode() == CovarianceMode::diagonal) {
    return MomentParams::diagonal(m, mu.mu2().diag() - m.cwiseProduct(m));
  }
  return MomentParams::full(m, mu.mu2().matrix() - m * m.transpose());
}

NaturalParams expectation_to_natural(const ExpectationParams& mu) {
  return moment_to_natural(expectation_to_moment(mu));
}

// --- scalar functionals ----------------------------------------------------

double log_partition(const NaturalParams& lam) {
  if (lam.mode() == CovarianceMode::diagonal) {
    const Vector prec = -2.0 * lam.lambda2().diag();
    return 0.5 * (lam.lambda1().array().square() / prec.array()).sum() -
           0.5 * prec.array().log().sum();
  }
  const Matrix prec = -2.0 * lam.lambda2().matrix();
  const Matrix l = cholesky_with_jitter(prec, "precision -2*lambda2");
  const Vector half = l.triangularView<Eigen::Lower>().solve(lam.lambda1());
  return 0.5 * half.squaredNorm() - l.diagonal().array().log().sum();
}

double conjugate_log_partition(const ExpectationParams& mu) {
  const NaturalParams lam = expectation_to_natural(mu);
  return pack(lam).dot(pack(mu)) - log_partition(lam);
}

double log_density(const NaturalParams& lam, const Vector& z) {
  require_same_dim(lam.dim(), z.size(), "log_density");
  const double quad = z.dot(lam.lambda2().apply(z));
  return lam.lambda1().dot(z) + quad - log_partition(lam) -
         0.5 * static_cast<double>(lam.dim()) * std::log(2.0 * std::numbers::pi);
}

double kl_divergence(const NaturalParams& q, const NaturalParams& p) {
  require_same_dim(q.dim(), p.dim(), "kl_divergence");
  if (q.mode() != p.mode()) throw ContractError("kl_divergence: covariance mode mismatch");
  if (pack(q) == pack(p)) return 0.0;

  const MeanCov qm = mean_cov(q);
  const MeanCov pm = mean_cov(p);
  const Vector delta = pm.mean - qm.mean;

  if (q.mode() == CovarianceMode::diagonal) {
    const Vector pp = -2.0 * p.lambda2().diag();
    const Vector ratio = pp.cwiseProduct(qm.cov.diag());  // Vq / Vp
    double kl = 0.0;
    for (Index j = 0; j < ratio.size(); ++j) {
      const double x = ratio(j) - 1.0;
      kl += (x - std::log1p(x)) + pp(j) * delta(j) * delta(j);
    }
    return 0.5 * kl;
  }
  const Matrix pp = -2.0 * p.lambda2().matrix();
  const Matrix pq = -2.0 * q.lambda2().matrix();
  const double trace_term = (pp * qm.cov.matrix()).trace();
  const double maha = delta.dot(pp * delta);
  const double logdet = spd_log_det(pq, "q precision") - spd_log_det(pp, "p precision");
  return 0.5 * (trace_term + maha - static_cast<double>(q.dim()) + logdet);
}

Matrix fisher_information(const NaturalParams& lam) {
  const MeanCov mc = mean_cov(lam);
  const Index d = lam.dim();
  const Vector& m = mc.mean;
  const FlatLayout layout = lam.layout();
  Matrix f = Matrix::Zero(layout.size(), layout.size());

  if (lam.mode() == CovarianceMode::diagonal) {
    const Vector& v = mc.cov.diag();
    for (Index j = 0; j < d; ++j) {
      f(j, j) = v(j);
      f(j, d + j) = f(d + j, j) = 2.0 * m(j) * v(j);
      f(d + j, d + j) = 2.0 * v(j) * v(j) + 4.0 * m(j) * m(j) * v(j);
    }
    return f;
  }

  const Matrix& v = mc.cov.matrix();
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) pairs.emplace_back(i, j);

  f.topLeftCorner(d, d) = v;
  for (Index a = 0; a < d; ++a) {
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto [c, e] = pairs[q];
      const double w = c == e ? 1.0 : 2.0;
      const double val = w * (v(a, c) * m(e) + v(a, e) * m(c));
      f(a, d + static_cast<Index>(q)) = val;
      f(d + static_cast<Index>(q), a) = val;
    }
  }
  // Isserlis: Cov(z_a z_b, z_c z_e) for z ~ N(m, V).
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const double wp = a == b ? 1.0 : 2.0;
    for (std::size_t q = p; q < pairs.size(); ++q) {
      const auto [c, e] = pairs[q];
      const double wq = c == e ? 1.0 : 2.0;
      const double cov = v(a, c) * v(b, e) + v(a, e) * v(b, c) + m(a) * m(c) * v(b, e) +
                         m(a) * m(e) * v(b, c) + m(b) * m(c) * v(a, e) + m(b) * m(e) * v(a, c);
      const Index r = d + static_cast<Index>(p);
      const Index s = d + static_cast<Index>(q);
      f(r, s) = f(s, r) = wp * wq * cov;
    }
  }
  return f;
}

FlatVec fisher_vector_product(const NaturalParams& lam, const FlatVec& v) {
  if (v.size() != lam.layout().size()) throw ContractError("fisher_vector_product: bad length");
  if (lam.mode() == CovarianceMode::full) return fisher_information(lam) * v;
  const MeanCov mc = mean_cov(lam);
  const Index d = lam.dim();
  FlatVec out(v.size());
  for (Index j = 0; j < d; ++j) {
    const double m = mc.mean(j);
    const double s = mc.cov.diag()(j);
    out(j) = s * v(j) + 2.0 * m * s * v(d + j);
    out(d + j) = 2.0 * m * s * v(j) + (2.0 * s * s + 4.0 * m * m * s) * v(d + j);
  }
  return out;
}

// --- sampling --------------------------------------------------------------

std::vector<Vector> standard_normal_draws(Index dim, std::size_t count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Vector eps(dim);
    for (Index j = 0; j < dim; ++j) eps(j) = normal(rng);
    out.push_back(std::move(eps));
  }
  return out;
}

std::vector<Vector> sample(const NaturalParams& lam, std::size_t count, Rng& rng) {
  if (count == 0) return {};
  const MeanCov mc = mean_cov(lam);
  std::vector<Vector> z = standard_normal_draws(lam.dim(), count, rng);
  if (lam.mode() == CovarianceMode::diagonal) {
    const Vector sd = mc.cov.diag().cwiseSqrt();
    for (Vector& v : z) v = mc.mean + sd.cwiseProduct(v);
    return z;
  }
  const Matrix l = cholesky_with_jitter(mc.cov.matrix(), "covariance");
  for (Vector& v : z) v = mc.mean + l * v;
  return z;
}

// --- printing --------------------------------------------------------------

std::string describe(const NaturalParams& lam) {
  const MeanCov mc = mean_cov(lam);
  const Eigen::IOFormat row(6, Eigen::DontAlignCols, " ", " ", "", "", "[", "]");
  const Matrix v = mc.cov.dense();
  const Matrix l2 = lam.lambda2().dense();
  std::ostringstream os;
  os << "Gaussian(D=" << lam.dim() << ", " << to_string(lam.mode()) << ")\n";
  for (Index i = 0; i < lam.dim(); ++i) {
    os << "  m=" << mc.mean(i) << "  V=" << v.row(i).format(row) << "  |  lambda1=" << lam.lambda1()(i)
       << "  lambda2=" << l2.row(i).format(row) << "\n";
  }
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const NaturalParams& lam) { return os << describe(lam); }

}  // namespace ngvi
