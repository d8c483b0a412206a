#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ngvi {

// Parameters outside their valid set (non-PD covariance, lambda not in Omega).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a precondition: dimension or mode mismatch, bad argument range.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A model evaluator produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// An optimizer step could not keep lambda inside Omega after the halving budget.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, Eigen::VectorXd offending_lambda2)
      : std::runtime_error(what), offending_(std::move(offending_lambda2)) {}
  const Eigen::VectorXd& offending_lambda2() const { return offending_; }

 private:
  Eigen::VectorXd offending_;
};

// Input data unusable: unreadable file, wrong shape, unexpected labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : DataError(located(what, line, column)), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string located(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    std::string out = what + " (line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ")";
  }

  std::size_t line_;
  std::size_t column_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ngvi
