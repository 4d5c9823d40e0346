#include <bit>
#include <cmath>
#include <numbers>

#include "dpcvm/simd/kernels.hpp"

namespace dpcvm::simd {

double supplement_angle(const double* x_i, const double* x_j, const double* x_r,
                        std::size_t dim) {
  double nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double u = x_i[k] - x_r[k], v = x_j[k] - x_r[k];
    nu += u * u;
    nv += v * v;
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  double minus = 0.0, plus = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double a = (x_i[k] - x_r[k]) * nv, b = (x_j[k] - x_r[k]) * nu;
    minus += (a - b) * (a - b);
    plus += (a + b) * (a + b);
  }
  return std::numbers::pi - 2.0 * std::atan2(std::sqrt(minus), std::sqrt(plus));
}

void solid_angle_scalar(const SolidAngleRow& in, double* a_row, std::size_t len) {
  constexpr double pi = std::numbers::pi;
  const double two_s_ir = 2.0 * in.s_ir;
  for (std::size_t j = 0; j < len; ++j) {
    if (in.d_rj[j] <= in.tie || in.d_ij[j] <= in.tie) {
      a_row[j] += pi;
      continue;
    }
    if (nearly_collinear(in.d_ir, in.d_rj[j], in.d_ij[j])) {
      a_row[j] += supplement_angle(in.x_i, in.x_j + j * in.dim, in.x_r, in.dim);
      continue;
    }
    double c = (in.d_ir + in.d_rj[j] - in.d_ij[j]) / (two_s_ir * in.s_rj[j]);
    c = c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
    a_row[j] += pi - std::acos(c);
  }
}

std::uint64_t and_popcount_scalar(const std::uint64_t* a, const std::uint64_t* b,
                                  std::size_t words) {
  std::uint64_t total = 0;
  for (std::size_t w = 0; w < words; ++w) total += std::popcount(a[w] & b[w]);
  return total;
}

}  // namespace dpcvm::simd
