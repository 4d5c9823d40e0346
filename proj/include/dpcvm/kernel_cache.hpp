#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Dense>

#include "dpcvm/geometry.hpp"

namespace dpcvm {

// On-disk cache of A_n. One file per covariate matrix, named
// "<hash>.dpan" with <hash> the 16-digit hex content hash of X.
//
// Layout, all little-endian:
//   char[8]  magic "DPCVMAN1"
//   u64      n
//   u64      d_x
//   f64      dup_tol
//   u64      content hash of X
//   f64[n*n] A, row-major
namespace kernel_cache {

// FNV-1a over the little-endian bytes of X in row-major order.
std::uint64_t content_hash(const Eigen::MatrixXd& X);

std::filesystem::path path_for(const std::filesystem::path& dir,
                               const Eigen::MatrixXd& X);

void write(const std::filesystem::path& file, const ProjectionKernel& kernel,
           std::uint64_t hash);

// nullopt when the file is missing or its header does not match X/dup_tol.
std::optional<ProjectionKernel> read(const std::filesystem::path& file,
                                     const Eigen::MatrixXd& X, double dup_tol);

// Loads from `dir` or builds and stores.
ProjectionKernel load_or_build(const std::filesystem::path& dir,
                               const Eigen::MatrixXd& X,
                               const KernelOptions& options);

}  // namespace kernel_cache
}  // namespace dpcvm
