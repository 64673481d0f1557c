#include "stokeshom/errors.hpp"

namespace stokeshom {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::TargetUnreachable: return "TargetUnreachable";
    case ErrorKind::NoNeighbor: return "NoNeighbor";
    case ErrorKind::FitFailure: return "FitFailure";
    case ErrorKind::ZeroGap: return "ZeroGap";
    case ErrorKind::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorKind::UnderResolved: return "UnderResolved";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::IllPosed: return "IllPosed";
    case ErrorKind::InconsistentInputs: return "InconsistentInputs";
    case ErrorKind::SurfaceUnderResolved: return "SurfaceUnderResolved";
    case ErrorKind::NonMonotone: return "NonMonotone";
    case ErrorKind::IncommensurateGrids: return "IncommensurateGrids";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::StepFailed: return "StepFailed";
  }
  return "Unknown";
}

static std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += "; ";
    out += l;
  }
  return out;
}

ConfigError::ConfigError(std::vector<std::string> diags)
    : Error(ErrorKind::ConfigInvalid, join(diags)), diagnostics(std::move(diags)) {}

}  // namespace stokeshom
