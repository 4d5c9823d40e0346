#pragma once

#include <stdexcept>
#include <string>

namespace dpcvm {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  data_error,
  separation_detected,
  singular_hessian,
  not_converged,
  singular_delta,
  empty_group,
  degenerate_weights,
  too_many_failed_resamples,
  too_many_failed_replicates,
  kernel_too_large,
  io_error,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace dpcvm
