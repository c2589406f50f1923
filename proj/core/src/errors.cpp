#include "hbmi/errors.hpp"

namespace hbmi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::RateMismatch: return "rate mismatch";
    case ErrorKind::InsufficientDuration: return "insufficient duration";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::InvalidFilter: return "invalid filter";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::ModelIncomplete: return "model incomplete";
    case ErrorKind::Stratification: return "stratification error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error("[" + module + "] " + std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      module_(std::move(module)),
      detail_(message) {}

}  // namespace hbmi
