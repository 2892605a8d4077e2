#pragma once

#include <stdexcept>
#include <string>

namespace ealpha {

enum class ErrorCode {
  config,
  schema,
  parse,
  structural,
  range,
  degenerate,
  insufficient_history,
  precondition,
  undefined_value,
  underdetermined,
  alignment,
  divergence,
  io,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. what() is a single line "<code>: <message>"
/// suitable for machine parsing at the CLI boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace ealpha
