#include "ngvi/linalg.hpp"

#include <cmath>
#include <sstream>

#include "ngvi/errors.hpp"

namespace ngvi {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

}  // namespace

double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_positive_definite(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  if (!a.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a, const std::string& what) {
  const Eigen::Index d = a.rows();
  if (a.rows() != a.cols()) throw ContractError(what + ": matrix is not square");
  if (!a.allFinite()) throw DomainError(what + ": matrix has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double scale = d > 0 ? std::abs(a.trace()) / static_cast<double>(d) : 0.0;
  for (double rel = kJitterStart; rel <= kJitterMax * (1 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd jittered = a;
    jittered.diagonal().array() += rel * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  std::ostringstream msg;
  msg << what << ": not positive definite (smallest eigenvalue " << min_eigenvalue(a) << ")";
  throw DomainError(msg.str());
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const std::string& what) {
  const Eigen::MatrixXd l = cholesky_with_jitter(a, what);
  const Eigen::MatrixXd linv =
      l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  Eigen::MatrixXd inv = linv.transpose() * linv;
  return 0.5 * (inv + inv.transpose());
}

double spd_log_det(const Eigen::MatrixXd& a, const std::string& what) {
  const Eigen::MatrixXd l = cholesky_with_jitter(a, what);
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace ngvi
