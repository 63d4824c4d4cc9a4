#pragma once

#include <stdexcept>
#include <string>

namespace ratecost {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  kSpec = 2,
  kInfeasible = 3,
  kNonConvergence = 4,
  kVerification = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// Malformed inputs: dimension mismatches, unnormalized rows, budget overruns.
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& what) : Error(ErrorKind::kSpec, what) {}
};

/// The requested cost level is below what any causal policy can reach.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double min_cost)
      : Error(ErrorKind::kInfeasible, what), min_cost_(min_cost) {}

  double min_cost() const { return min_cost_; }

 private:
  double min_cost_;
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what)
      : Error(ErrorKind::kNonConvergence, what) {}
};

/// Raised when a finite proposal table cannot represent a conditional law, or
/// when a decoded action disagrees with the encoded one.
class VerificationError : public Error {
 public:
  explicit VerificationError(const std::string& what)
      : Error(ErrorKind::kVerification, what) {}
};

}  // namespace ratecost
