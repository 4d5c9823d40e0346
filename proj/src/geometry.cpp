#include "dpcvm/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dpcvm/error.hpp"
#include "dpcvm/parallel.hpp"

namespace dpcvm {
namespace {

std::atomic<long> build_counter{0};

constexpr double pi = std::numbers::pi;

// Contiguous row blocks with roughly equal upper-triangle work.
std::vector<Eigen::Index> row_blocks(Eigen::Index n, int blocks) {
  std::vector<Eigen::Index> bounds{0};
  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
  const double per = total / blocks;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += static_cast<double>(n - i);
    if (acc >= per * static_cast<double>(bounds.size()) && i + 1 < n)
      bounds.push_back(i + 1);
  }
  bounds.push_back(n);
  return bounds;
}

}  // namespace

double sphere_factor(int d_x) {
  if (d_x < 1) fail(ErrorKind::invalid_argument, "d_x must be at least 1");
  const double h = 0.5 * d_x;
  return std::pow(pi, h - 1.0) / std::tgamma(h);
}

double aijr_circle(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
                   const Eigen::VectorXd& x_r, double dup_tol) {
  if (x_i.size() < 1 || x_i.size() != x_j.size() || x_i.size() != x_r.size())
    fail(ErrorKind::dimension_mismatch, "aijr needs three rows of equal length >= 1");
  const Eigen::VectorXd u = x_i - x_r;
  const Eigen::VectorXd v = x_j - x_r;
  const double nu = u.norm(), nv = v.norm();
  const bool ir = nu <= dup_tol;
  const bool jr = nv <= dup_tol;
  const bool ij = (x_i - x_j).norm() <= dup_tol;
  if (ir && jr) return 2.0 * pi;
  if (ir || jr || ij) return pi;
  return simd::supplement_angle(x_i.data(), x_j.data(), x_r.data(),
                               static_cast<std::size_t>(x_i.size()));
}

double aijr(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
            const Eigen::VectorXd& x_r, int d_x, double dup_tol) {
  if (d_x < 1) fail(ErrorKind::invalid_argument, "d_x must be at least 1");
  if (x_i.size() != d_x)
    fail(ErrorKind::dimension_mismatch, "row length differs from d_x");
  return aijr_circle(x_i, x_j, x_r, dup_tol) * sphere_factor(d_x);
}

ProjectionKernel an_matrix(const Eigen::MatrixXd& X, const KernelOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 1) fail(ErrorKind::invalid_argument, "kernel needs at least one row");
  if (d < 1) fail(ErrorKind::invalid_argument, "kernel needs at least one covariate");
  if (n > max_kernel_rows)
    fail(ErrorKind::kernel_too_large,
         "n = " + std::to_string(n) + " exceeds the dense kernel limit of " +
             std::to_string(max_kernel_rows) + " rows");
  if (!X.allFinite())
    fail(ErrorKind::data_error, "non-finite covariates in kernel input");
  if (!(options.dup_tol >= 0.0))
    fail(ErrorKind::invalid_argument, "dup_tol must be non-negative");
  ++build_counter;

  const simd::Backend backend = options.backend.value_or(simd::best_backend());
  if (!simd::available(backend))
    fail(ErrorKind::invalid_argument,
         "SIMD backend " + std::string(simd::to_string(backend)) +
             " is not available on this CPU");

  const auto un = static_cast<std::size_t>(n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr = X;
  std::vector<double> dist2(un * un, 0.0), dist(un * un, 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = (Xr.row(i) - Xr.row(j)).squaredNorm();
      dist2[i * un + j] = dist2[j * un + i] = s;
      dist[i * un + j] = dist[j * un + i] = std::sqrt(s);
    }
  const double tie = options.dup_tol * options.dup_tol;

  // Column i of the column-major result holds row i of the upper triangle
  // contiguously (entries j >= i); the other half is mirrored at the end.
  ProjectionKernel k;
  k.A = Eigen::MatrixXd::Zero(n, n);
  double* upper = k.A.data();
  const int threads = resolve_threads(options.threads);
  const auto blocks = row_blocks(n, threads == 1 ? 1 : 8 * threads);
  parallel_for(blocks.size() - 1, threads, [&](std::size_t b) {
    for (Eigen::Index i = blocks[b]; i < blocks[b + 1]; ++i) {
      double* a = upper + i * un;
      const std::size_t len = un - static_cast<std::size_t>(i) - 1;
      double diag = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const double d_ir = dist2[i * un + r];
        const double* d_r = dist2.data() + r * un + i + 1;
        if (d_ir <= tie) {
          diag += 2.0 * pi;
          for (std::size_t j = 0; j < len; ++j) a[i + 1 + j] += d_r[j] <= tie ? 2.0 * pi : pi;
          continue;
        }
        diag += pi;
        const simd::SolidAngleRow in{d_r, dist.data() + r * un + i + 1,
                                     dist2.data() + i * un + i + 1, d_ir,
                                     dist[i * un + r], tie,
                                     Xr.data() + i * d, Xr.data() + r * d,
                                     Xr.data() + (i + 1) * d, static_cast<std::size_t>(d)};
        simd::solid_angle(backend, in, a + i + 1, len);
      }
      a[i] = diag;
    }
  });

  dist2 = {};
  dist = {};
  const double scale = sphere_factor(static_cast<int>(d));
  k.A *= scale;
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) k.A(i, j) = k.A(j, i);
  k.n = n;
  k.d_x = static_cast<int>(d);
  k.dup_tol = options.dup_tol;
  k.backend = backend;
  return k;
}

long kernel_build_count() { return build_counter.load(); }

}  // namespace dpcvm
