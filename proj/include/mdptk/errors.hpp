#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdptk {

/// Thrown when a model fails its structural invariants (row sums, ranges, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear system that should be solved exactly is (numerically) singular.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method hit its iteration budget.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_residual, std::size_t iterations)
      : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  std::size_t iterations_;
};

/// Representation policy iteration revisited a policy without reaching a fixed point.
class PolicyCycleError : public NonConvergenceError {
 public:
  PolicyCycleError(const std::string& what, std::vector<std::vector<std::size_t>> visited)
      : NonConvergenceError(what, 0.0, visited.size()), visited_(std::move(visited)) {}

  const std::vector<std::vector<std::size_t>>& visited_policies() const noexcept { return visited_; }

 private:
  std::vector<std::vector<std::size_t>> visited_;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnboundedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The chain induced by a policy has no unique, strictly positive stationary distribution.
class NotErgodicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidKernelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the 1-based line number (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mdptk
