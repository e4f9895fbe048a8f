#include "tfinfer/error.hpp"

namespace tfinfer {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidSize: return "invalid size";
    case ErrorCode::Dimension: return "dimension mismatch";
    case ErrorCode::SizeLimit: return "size limit exceeded";
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::Convergence: return "convergence failure";
    case ErrorCode::Numerical: return "numerical error";
    case ErrorCode::InsufficientData: return "insufficient data";
  }
  return "unknown error";
}

}  // namespace tfinfer
