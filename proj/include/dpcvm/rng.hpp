#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpcvm {

// SplitMix64 finalizer; used to turn (seed, tag, index...) tuples into
// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path) noexcept;

// Stream tags keep substreams for different purposes disjoint.
enum class StreamTag : std::uint64_t {
  bootstrap = 1,
  ate_resample = 3,
  dgp = 4,
  replicate = 5,
};

// Random stream with a platform-independent output sequence.
//
// The engine is std::mt19937_64, whose output is fixed by the standard.
// Uniforms take the top 53 bits; normals use the Marsaglia polar method.
// std::*_distribution objects are not used because their algorithms are
// implementation defined.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  static Stream substream(std::uint64_t seed, StreamTag tag,
                          std::uint64_t index) {
    return Stream(derive_seed(seed, {static_cast<std::uint64_t>(tag), index}));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  // Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t entropy_seed();

}  // namespace dpcvm
