#pragma once

#include <optional>

#include <Eigen/Dense>

#include "dpcvm/simd/kernels.hpp"

namespace dpcvm {

// Dense storage is 8 n^2 bytes; larger inputs are rejected.
inline constexpr Eigen::Index max_kernel_rows = 20000;

// c(d) = pi^(d/2 - 1) / Gamma(d/2): the factor that turns the circle-scale
// solid angle into the measure on the unit sphere in R^d.
double sphere_factor(int d_x);

// Solid angle (in circle units, before sphere_factor) of the directions b
// with b'x_i <= b'x_r and b'x_j <= b'x_r:
//   2 pi                     if x_i = x_j = x_r
//   pi                       if exactly one of x_i = x_j, x_i = x_r, x_j = x_r
//   pi - arccos(<x_i - x_r, x_j - x_r> / (|x_i - x_r| |x_j - x_r|)) otherwise
// Points closer than dup_tol (Euclidean) count as equal.
double aijr_circle(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
                   const Eigen::VectorXd& x_r, double dup_tol = 1e-12);

// aijr_circle(...) * sphere_factor(d_x).
double aijr(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
            const Eigen::VectorXd& x_r, int d_x, double dup_tol = 1e-12);

struct KernelOptions {
  double dup_tol = 1e-12;
  int threads = 1;
  // Defaults to simd::best_backend().
  std::optional<simd::Backend> backend;
};

// A_n with A[i][j] = sum_r aijr(X_i, X_j, X_r). Symmetric and positive
// semidefinite; built once and shared by every bootstrap replicate.
struct ProjectionKernel {
  Eigen::MatrixXd A;
  Eigen::Index n = 0;
  int d_x = 0;
  double dup_tol = 1e-12;
  simd::Backend backend = simd::Backend::scalar;
};

// O(n^2 d) distance setup plus O(n^3) accumulation over the upper triangle.
// Work is split over rows i; each entry is summed over r in increasing order
// by a single thread, so the result does not depend on the thread count.
ProjectionKernel an_matrix(const Eigen::MatrixXd& X, const KernelOptions& options = {});

// Number of an_matrix() calls in this process; lets tests check that
// bootstrap code never rebuilds the kernel.
long kernel_build_count();

}  // namespace dpcvm
