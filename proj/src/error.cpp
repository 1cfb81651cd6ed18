#include "sawlab/error.hpp"

namespace sawlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invalid_state: return "invalid_state";
    case ErrorKind::malformed_header: return "malformed_header";
    case ErrorKind::truncated_payload: return "truncated_payload";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::degenerate_critic: return "degenerate_critic";
  }
  return "unknown";
}

}  // namespace sawlab
