// Compiled with -mavx2 -mfma. Only called after a runtime CPU check.
#include "dpcvm/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace dpcvm::simd {
namespace {

// R(z) ~ (asin(x) - x) / x with z = x^2 in [0, 1/4]; coefficients from
// fdlibm e_asin.c.
inline __m256d asin_rational(__m256d z) {
  const __m256d ps0 = _mm256_set1_pd(1.66666666666666657415e-01);
  const __m256d ps1 = _mm256_set1_pd(-3.25565818622400915405e-01);
  const __m256d ps2 = _mm256_set1_pd(2.01212532134862925881e-01);
  const __m256d ps3 = _mm256_set1_pd(-4.00555345006794114027e-02);
  const __m256d ps4 = _mm256_set1_pd(7.91534994289814532176e-04);
  const __m256d ps5 = _mm256_set1_pd(3.47933107596021167570e-05);
  const __m256d qs1 = _mm256_set1_pd(-2.40339491173441421878e+00);
  const __m256d qs2 = _mm256_set1_pd(2.02094576023350569471e+00);
  const __m256d qs3 = _mm256_set1_pd(-6.88283971605453293030e-01);
  const __m256d qs4 = _mm256_set1_pd(7.70381505559019352791e-02);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d p = _mm256_fmadd_pd(z, ps5, ps4);
  p = _mm256_fmadd_pd(z, p, ps3);
  p = _mm256_fmadd_pd(z, p, ps2);
  p = _mm256_fmadd_pd(z, p, ps1);
  p = _mm256_fmadd_pd(z, p, ps0);
  p = _mm256_mul_pd(z, p);
  __m256d q = _mm256_fmadd_pd(z, qs4, qs3);
  q = _mm256_fmadd_pd(z, q, qs2);
  q = _mm256_fmadd_pd(z, q, qs1);
  q = _mm256_fmadd_pd(z, q, one);
  return _mm256_div_pd(p, q);
}

// pi - acos(c) for c in [-1, 1].
inline __m256d supplement_acos(__m256d c) {
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d pi = _mm256_set1_pd(3.14159265358979311600e+00);
  const __m256d pio2 = _mm256_set1_pd(1.57079632679489655800e+00);
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d a = _mm256_andnot_pd(sign, c);
  const __m256d small = _mm256_cmp_pd(a, half, _CMP_LE_OQ);
  const __m256d z_big = _mm256_mul_pd(_mm256_sub_pd(one, a), half);
  const __m256d z = _mm256_blendv_pd(z_big, _mm256_mul_pd(c, c), small);
  const __m256d s = _mm256_blendv_pd(_mm256_sqrt_pd(z_big), c, small);
  const __m256d as = _mm256_fmadd_pd(s, asin_rational(z), s);
  const __m256d t_small = _mm256_add_pd(pio2, as);
  const __m256d t_pos = _mm256_fnmadd_pd(two, as, pi);
  const __m256d t_neg = _mm256_mul_pd(two, as);
  const __m256d positive = _mm256_cmp_pd(c, _mm256_setzero_pd(), _CMP_GT_OQ);
  const __m256d t_big = _mm256_blendv_pd(t_neg, t_pos, positive);
  return _mm256_blendv_pd(t_big, t_small, small);
}

// Four columns starting at j; lanes at or beyond `valid` are padding.
inline __m256d solid_angle_block(const SolidAngleRow& in, const double* d_rj_p,
                                 const double* s_rj_p, const double* d_ij_p,
                                 std::size_t j, std::size_t valid) {
  const __m256d pi = _mm256_set1_pd(3.14159265358979311600e+00);
  const __m256d lo = _mm256_set1_pd(-1.0);
  const __m256d hi = _mm256_set1_pd(1.0);
  const __m256d tie = _mm256_set1_pd(in.tie);
  const __m256d d_ir = _mm256_set1_pd(in.d_ir);
  const __m256d two_s_ir = _mm256_set1_pd(2.0 * in.s_ir);
  const __m256d d_rj = _mm256_loadu_pd(d_rj_p);
  const __m256d s_rj = _mm256_loadu_pd(s_rj_p);
  const __m256d d_ij = _mm256_loadu_pd(d_ij_p);
  const __m256d num = _mm256_sub_pd(_mm256_add_pd(d_ir, d_rj), d_ij);
  __m256d c = _mm256_div_pd(num, _mm256_mul_pd(two_s_ir, s_rj));
  c = _mm256_min_pd(_mm256_max_pd(c, lo), hi);
  __m256d term = supplement_acos(c);
  const __m256d tied = _mm256_or_pd(_mm256_cmp_pd(d_rj, tie, _CMP_LE_OQ),
                                    _mm256_cmp_pd(d_ij, tie, _CMP_LE_OQ));
  term = _mm256_blendv_pd(term, pi, tied);

  // Same test as nearly_collinear(), evaluated lane-wise without FMA
  // contraction so both backends pick identical lanes.
  const __m256d sum = _mm256_add_pd(_mm256_add_pd(d_ir, d_rj), d_ij);
  const __m256d area = _mm256_sub_pd(
      _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(4.0), d_ir), d_rj), _mm256_mul_pd(num, num));
  const __m256d bound = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(1e-4), sum), sum);
  const __m256d flat = _mm256_andnot_pd(tied, _mm256_cmp_pd(area, bound, _CMP_LT_OQ));
  int mask = _mm256_movemask_pd(flat) & ((1 << valid) - 1);
  if (mask != 0) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, term);
    for (std::size_t k = 0; k < valid; ++k)
      if (mask & (1 << k))
        lanes[k] = supplement_angle(in.x_i, in.x_j + (j + k) * in.dim, in.x_r, in.dim);
    term = _mm256_load_pd(lanes);
  }
  return term;
}

}  // namespace

void solid_angle_avx2(const SolidAngleRow& in, double* a_row, std::size_t len) {
  std::size_t j = 0;
  for (; j + 4 <= len; j += 4) {
    const __m256d term = solid_angle_block(in, in.d_rj + j, in.s_rj + j, in.d_ij + j, j, 4);
    _mm256_storeu_pd(a_row + j, _mm256_add_pd(_mm256_loadu_pd(a_row + j), term));
  }
  if (j < len) {
    // Tail through a padded lane block so every element takes the same path.
    alignas(32) double d_rj[4] = {1.0, 1.0, 1.0, 1.0};
    alignas(32) double s_rj[4] = {1.0, 1.0, 1.0, 1.0};
    alignas(32) double d_ij[4] = {1.0, 1.0, 1.0, 1.0};
    alignas(32) double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t rest = len - j;
    for (std::size_t k = 0; k < rest; ++k) {
      d_rj[k] = in.d_rj[j + k];
      s_rj[k] = in.s_rj[j + k];
      d_ij[k] = in.d_ij[j + k];
      acc[k] = a_row[j + k];
    }
    const __m256d term = solid_angle_block(in, d_rj, s_rj, d_ij, j, rest);
    _mm256_store_pd(acc, _mm256_add_pd(_mm256_load_pd(acc), term));
    for (std::size_t k = 0; k < rest; ++k) a_row[j + k] = acc[k];
  }
}

std::uint64_t and_popcount_avx2(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words) {
  // Nibble lookup popcount (Mula et al.), accumulated with SAD.
  const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3,
                                       3, 4, 0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3,
                                       2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  __m256i acc = _mm256_setzero_si256();
  std::size_t w = 0;
  for (; w + 4 <= words; w += 4) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + w));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + w));
    const __m256i v = _mm256_and_si256(va, vb);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
    const __m256i cnt =
        _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(cnt, _mm256_setzero_si256()));
  }
  alignas(32) std::uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  std::uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; w < words; ++w) total += static_cast<std::uint64_t>(__builtin_popcountll(a[w] & b[w]));
  return total;
}

bool avx2_compiled() { return true; }

}  // namespace dpcvm::simd

#else

namespace dpcvm::simd {

void solid_angle_avx2(const SolidAngleRow& in, double* a_row, std::size_t len) {
  solid_angle_scalar(in, a_row, len);
}

std::uint64_t and_popcount_avx2(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words) {
  return and_popcount_scalar(a, b, words);
}

bool avx2_compiled() { return false; }

}  // namespace dpcvm::simd

#endif
