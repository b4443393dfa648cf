#pragma once

#include <stdexcept>
#include <string>

namespace sdm {

// Error categories mirrored by the C API status codes.
enum class ErrorCode {
  InvalidArg,
  Parse,
  Io,
  State,
  Numeric,
  Capacity,
  NotReady,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdm
