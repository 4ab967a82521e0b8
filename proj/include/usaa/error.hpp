#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace usaa {

// Stable identifiers used by the CLI when printing machine-parseable errors.
enum class ErrorCode {
  kParameter,
  kFormat,
  kTruncated,
  kUnsupported,
  kValidation,
  kRange,
  kShape,
  kIo,
  kVersion,
  kUndefined,
  kExhausted,
  kUsage,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace usaa
