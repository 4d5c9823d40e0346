#include "dpcvm/kernel_cache.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dpcvm/error.hpp"

namespace dpcvm::kernel_cache {
namespace {

constexpr std::array<char, 8> magic = {'D', 'P', 'C', 'V', 'M', 'A', 'N', '1'};

template <class T>
void put(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
bool get(std::istream& is, T& value) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return true;
}

}  // namespace

std::uint64_t content_hash(const Eigen::MatrixXd& X) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(X.rows()));
  feed(static_cast<std::uint64_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index k = 0; k < X.cols(); ++k) feed(std::bit_cast<std::uint64_t>(X(i, k)));
  return h;
}

std::filesystem::path path_for(const std::filesystem::path& dir,
                               const Eigen::MatrixXd& X) {
  std::ostringstream name;
  name << std::hex << std::setw(16) << std::setfill('0') << content_hash(X) << ".dpan";
  return dir / name.str();
}

void write(const std::filesystem::path& file, const ProjectionKernel& kernel,
           std::uint64_t hash) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::io_error, "cannot write kernel cache " + file.string());
  os.write(magic.data(), magic.size());
  put<std::uint64_t>(os, static_cast<std::uint64_t>(kernel.n));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(kernel.d_x));
  put<double>(os, kernel.dup_tol);
  put<std::uint64_t>(os, hash);
  for (Eigen::Index i = 0; i < kernel.n; ++i)
    for (Eigen::Index j = 0; j < kernel.n; ++j) put<double>(os, kernel.A(i, j));
  if (!os) fail(ErrorKind::io_error, "short write to kernel cache " + file.string());
}

std::optional<ProjectionKernel> read(const std::filesystem::path& file,
                                     const Eigen::MatrixXd& X, double dup_tol) {
  std::ifstream is(file, std::ios::binary);
  if (!is) return std::nullopt;
  std::array<char, 8> m{};
  if (!is.read(m.data(), m.size()) || m != magic) return std::nullopt;
  std::uint64_t n = 0, d = 0, hash = 0;
  double tol = 0.0;
  if (!get(is, n) || !get(is, d) || !get(is, tol) || !get(is, hash)) return std::nullopt;
  if (n != static_cast<std::uint64_t>(X.rows()) ||
      d != static_cast<std::uint64_t>(X.cols()) || tol != dup_tol ||
      hash != content_hash(X))
    return std::nullopt;
  ProjectionKernel k;
  k.n = static_cast<Eigen::Index>(n);
  k.d_x = static_cast<int>(d);
  k.dup_tol = tol;
  k.A.resize(k.n, k.n);
  for (Eigen::Index i = 0; i < k.n; ++i)
    for (Eigen::Index j = 0; j < k.n; ++j)
      if (!get(is, k.A(i, j))) return std::nullopt;
  return k;
}

ProjectionKernel load_or_build(const std::filesystem::path& dir,
                               const Eigen::MatrixXd& X,
                               const KernelOptions& options) {
  const auto file = path_for(dir, X);
  if (auto cached = read(file, X, options.dup_tol)) return std::move(*cached);
  ProjectionKernel k = an_matrix(X, options);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  write(file, k, content_hash(X));
  return k;
}

}  // namespace dpcvm::kernel_cache
