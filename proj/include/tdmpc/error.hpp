#pragma once

#include <stdexcept>
#include <string>

namespace tdmpc {

enum class ErrorCode {
  kInvalidArgument,  // dimension mismatch, bad construction input
  kConfig,           // scenario schema violation
  kCertificate,      // a certificate cannot be issued (refusal)
  kNumerical,        // solver or iteration failure
  kOracle,           // verification oracle could not decide
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Numerical failure that carries the last residual of the failing iteration.
class ResidualError : public Error {
 public:
  ResidualError(ErrorCode code, const std::string& what, double residual)
      : Error(code, what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace tdmpc
