#pragma once

#include <stdexcept>
#include <string>

namespace evobo {

// Precondition or schema violation in caller-supplied data.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization or likelihood evaluation broke down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegeneratePosteriorError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Remote service unreachable or returned an unusable response.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int attempts)
      : std::runtime_error(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No untested hypotheses remain in the world.
class ExhaustionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evobo
