#include <cstdlib>
#include <string>

#include "dpcvm/simd/kernels.hpp"

namespace dpcvm::simd {

bool avx2_compiled();

std::string_view to_string(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

bool available(Backend backend) {
  if (backend == Backend::scalar) return true;
#if defined(__x86_64__) || defined(__i386__)
  static const bool cpu = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return cpu && avx2_compiled();
#else
  return false;
#endif
}

Backend best_backend() {
  static const Backend chosen = [] {
    if (const char* env = std::getenv("DPCVM_SIMD"); env && std::string(env) == "scalar")
      return Backend::scalar;
    return available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
  }();
  return chosen;
}

void solid_angle(Backend backend, const SolidAngleRow& in, double* a_row,
                 std::size_t len) {
  if (backend == Backend::avx2)
    solid_angle_avx2(in, a_row, len);
  else
    solid_angle_scalar(in, a_row, len);
}

std::uint64_t and_popcount(Backend backend, const std::uint64_t* a,
                           const std::uint64_t* b, std::size_t words) {
  return backend == Backend::avx2 ? and_popcount_avx2(a, b, words)
                                  : and_popcount_scalar(a, b, words);
}

}  // namespace dpcvm::simd
