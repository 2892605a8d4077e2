#include "ealpha/errors.hpp"

namespace ealpha {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "config";
    case ErrorCode::schema: return "schema";
    case ErrorCode::parse: return "parse";
    case ErrorCode::structural: return "structural";
    case ErrorCode::range: return "range";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::insufficient_history: return "insufficient-history";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::undefined_value: return "undefined-value";
    case ErrorCode::underdetermined: return "underdetermined";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ealpha
