#pragma once

#include <stdexcept>
#include <string>

namespace slicelens {

enum class ErrorCode {
  invalid_argument,
  io,
  validation,
  not_found,
  state,
};

/// Exception type thrown by every core module; the code maps 1:1 onto the
/// C API status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace slicelens
