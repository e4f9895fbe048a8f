#pragma once

#include <stdexcept>
#include <string>

namespace tfinfer {

/// Failure categories shared by every module. The C API maps these one-to-one
/// onto tfi_status codes, and the CLI maps them onto process exit codes.
enum class ErrorCode {
  InvalidArgument,
  InvalidSize,
  Dimension,
  SizeLimit,
  Domain,
  Parse,
  Io,
  Convergence,
  Numerical,
  InsufficientData,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by iterative solvers. Carries the last residual seen so callers can
/// report how far off the run was.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(ErrorCode::Convergence, what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

const char* to_string(ErrorCode code) noexcept;

}  // namespace tfinfer
