#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and an AVX2 variant; dispatch happens at runtime.
namespace dpcvm::simd {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend backend);

// True when the CPU (and this build) can run the backend.
bool available(Backend backend);

// Fastest available backend; DPCVM_SIMD=scalar in the environment forces the
// scalar reference path.
Backend best_backend();

// Inputs for one anchor point r and one row i of the solid-angle kernel,
// over a contiguous range of columns j. Squared distances come from the
// same matrix, so the law of cosines gives
//   cos(angle at r) = (d_ir + d_rj - d_ij) / (2 sqrt(d_ir) sqrt(d_rj)).
// Nearly collinear triples lose accuracy that way and are recomputed from
// the rows themselves.
struct SolidAngleRow {
  const double* d_rj;  // |x_r - x_j|^2
  const double* s_rj;  // |x_r - x_j|
  const double* d_ij;  // |x_i - x_j|^2
  double d_ir;         // |x_i - x_r|^2, must exceed tie
  double s_ir;
  double tie;          // squared duplicate tolerance
  const double* x_i;
  const double* x_r;
  const double* x_j;   // row-major rows for j = 0, 1, ...
  std::size_t dim;
};

// True when the law of cosines is too ill-conditioned for this triple:
// 4 d_ir d_rj - num^2 is (4 x triangle area)^2.
inline bool nearly_collinear(double d_ir, double d_rj, double d_ij) {
  const double num = d_ir + d_rj - d_ij;
  const double s = d_ir + d_rj + d_ij;
  return 4.0 * d_ir * d_rj - num * num < 1e-4 * s * s;
}

// pi minus the angle between u = x_i - x_r and v = x_j - x_r, from
// 2 atan2(| u|v| - v|u| |, | u|v| + v|u| |).
double supplement_angle(const double* x_i, const double* x_j, const double* x_r,
                        std::size_t dim);

// a_row[j] += pi - angle_j, or pi when x_j coincides with x_r or x_i.
void solid_angle_scalar(const SolidAngleRow& in, double* a_row, std::size_t len);
void solid_angle_avx2(const SolidAngleRow& in, double* a_row, std::size_t len);
void solid_angle(Backend backend, const SolidAngleRow& in, double* a_row,
                 std::size_t len);

// popcount(a & b) over `words` 64-bit words.
std::uint64_t and_popcount_scalar(const std::uint64_t* a, const std::uint64_t* b,
                                  std::size_t words);
std::uint64_t and_popcount_avx2(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words);
std::uint64_t and_popcount(Backend backend, const std::uint64_t* a,
                           const std::uint64_t* b, std::size_t words);

}  // namespace dpcvm::simd
