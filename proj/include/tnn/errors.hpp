#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tnn {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LookupError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when a Neumann series cannot converge (delta >= 1).
struct CertificateInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver ran out of iterations. `best` is the best value seen.
struct ConvergenceError : std::runtime_error {
  double best = 0.0;
  ConvergenceError(const std::string& what, double best_value)
      : std::runtime_error(what), best(best_value) {}
};

}  // namespace tnn
