#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace demexp {

// Every error carries a short machine-readable kind so the CLI can print
// "error: <kind>: <message>" on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

class RankDeficientError : public Error {
 public:
  explicit RankDeficientError(const std::string& message) : Error("rank_deficient", message) {}
};

class FactorizationError : public Error {
 public:
  explicit FactorizationError(const std::string& message) : Error("factorization", message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, std::vector<double> last_iterate)
      : Error("convergence", message), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace demexp
