#pragma once

#include <string>

#include <Eigen/Dense>

namespace ngvi {

// Lower Cholesky factor of a symmetric matrix expected to be positive definite.
// On failure, jitter starting at 1e-10 * trace / D is added to the diagonal and
// escalated x10 up to 1e-4 * trace / D; past that a DomainError names the
// smallest eigenvalue. `what` labels the matrix in error messages.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a, const std::string& what);

// Strict check (no jitter): symmetric and LLT succeeds.
bool is_positive_definite(const Eigen::MatrixXd& a);

// Inverse and log-determinant of an SPD matrix via its Cholesky factor.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const std::string& what);
double spd_log_det(const Eigen::MatrixXd& a, const std::string& what);

// Smallest eigenvalue, for diagnostics.
double min_eigenvalue(const Eigen::MatrixXd& a);

}  // namespace ngvi
