#ifndef STOKESHOM_ERRORS_HPP
#define STOKESHOM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace stokeshom {

enum class ErrorKind {
  InvalidParameter,
  TargetUnreachable,
  NoNeighbor,
  FitFailure,
  ZeroGap,
  QuadratureUnderResolved,
  UnderResolved,
  NoConvergence,
  IllPosed,
  InconsistentInputs,
  SurfaceUnderResolved,
  NonMonotone,
  IncommensurateGrids,
  ConfigInvalid,
  StepFailed
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown by the iterative solvers; carries the residual history tail.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, int iterations, double residual)
      : Error(ErrorKind::NoConvergence, what), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

// Collects every violation before throwing.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

}  // namespace stokeshom

#endif
