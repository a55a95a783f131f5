#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgnn {

/// Malformed case or config text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a semantic rule (slack count, dangling ids, ...).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(int iterations, double mismatch_norm)
      : std::runtime_error("Newton solve did not converge after " + std::to_string(iterations) +
                           " iterations (|g|inf = " + std::to_string(mismatch_norm) + ")"),
        iterations_(iterations),
        mismatch_norm_(mismatch_norm) {}
  int iterations() const { return iterations_; }
  double mismatch_norm() const { return mismatch_norm_; }

 private:
  int iterations_;
  double mismatch_norm_;
};

class SingularJacobian : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class InfeasibleStep : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TooManyFailures : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EmptySplit : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DivergedLoss : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class MaskViolation : public std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace pgnn
