#include "dpcvm/error.hpp"

namespace dpcvm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::data_error: return "data_error";
    case ErrorKind::separation_detected: return "separation_detected";
    case ErrorKind::singular_hessian: return "singular_hessian";
    case ErrorKind::not_converged: return "not_converged";
    case ErrorKind::singular_delta: return "singular_delta";
    case ErrorKind::empty_group: return "empty_group";
    case ErrorKind::degenerate_weights: return "degenerate_weights";
    case ErrorKind::too_many_failed_resamples: return "too_many_failed_resamples";
    case ErrorKind::too_many_failed_replicates: return "too_many_failed_replicates";
    case ErrorKind::kernel_too_large: return "kernel_too_large";
    case ErrorKind::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace dpcvm
