#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpg {

enum class ErrorKind {
  SingularSystem,
  NotPositiveDefinite,
  AntipodalPoints,
  NumericalDomain,
  StepTooLong,
  InverseRetractionFailure,
  UnboundedEstimate,
  InsufficientData,
  BadShape,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the
/// harness in particular) can map it to a report row or an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::AntipodalPoints: return "AntipodalPoints";
    case ErrorKind::NumericalDomain: return "NumericalDomain";
    case ErrorKind::StepTooLong: return "StepTooLong";
    case ErrorKind::InverseRetractionFailure: return "InverseRetractionFailure";
    case ErrorKind::UnboundedEstimate: return "UnboundedEstimate";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::BadShape: return "BadShape";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rpg
