#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbmi {

// Error categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  InvalidArgument,     // bad parameter or usage
  RateMismatch,        // sampling-rate ratio is not an integer
  InsufficientDuration,
  InsufficientData,
  InvalidFilter,
  Domain,              // value outside the admissible domain (e.g. negative NMF input)
  Numerical,           // conditioning / factorization failure
  ModelIncomplete,
  Stratification,
  Parse,
  Validation,
  Io,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this exception. `module` names the
// subsystem that raised it so messages read e.g. "[synergies] domain: ...".
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorKind kind_;
  std::string module_;
  std::string detail_;
};

}  // namespace hbmi
