#include "nwadapt/error.hpp"

namespace nwadapt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_shape: return "invalid_shape";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::tape_mismatch: return "tape_mismatch";
    case ErrorKind::invalid_label: return "invalid_label";
    case ErrorKind::data: return "data";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::profile_mismatch: return "profile_mismatch";
    case ErrorKind::floor_violation: return "floor_violation";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::invalid_argument:
      return 2;
    case ErrorKind::divergence:
      return 4;
    default:
      return 3;
  }
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace nwadapt
