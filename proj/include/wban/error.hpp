#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wban {

// Base of every error the library raises. `code()` is a stable,
// machine-parsable identifier used by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error("CONFIG", violations.empty() ? "invalid configuration" : violations.front()),
        violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class NonConvergence : public Error {
 public:
  NonConvergence(double best_residual, int iterations)
      : Error("NONCONVERGENCE", "fixed point did not converge (best residual " +
                                    std::to_string(best_residual) + " after " +
                                    std::to_string(iterations) + " iterations)"),
        best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error("DIVERGENCE", what) {}
};

class UnstableSystem : public Error {
 public:
  explicit UnstableSystem(double rho)
      : Error("UNSTABLE", "queue unstable: utilization " + std::to_string(rho) + " >= 1"), rho_(rho) {}

  double utilization() const noexcept { return rho_; }

 private:
  double rho_;
};

class NegativeDuration : public Error {
 public:
  explicit NegativeDuration(const std::string& what) : Error("NEGATIVE_DURATION", what) {}
};

class InvalidDutyCycle : public Error {
 public:
  explicit InvalidDutyCycle(const std::string& what) : Error("INVALID_DUTY_CYCLE", what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("PARSE", "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyTrace : public Error {
 public:
  EmptyTrace() : Error("EMPTY_TRACE", "trace contains no samples") {}
  explicit EmptyTrace(const std::string& what) : Error("EMPTY_TRACE", what) {}
};

class ScenarioError : public Error {
 public:
  explicit ScenarioError(const std::string& what) : Error("SCENARIO", what) {}
};

}  // namespace wban
