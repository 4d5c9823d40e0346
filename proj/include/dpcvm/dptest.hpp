#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpcvm/dataset.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/geometry.hpp"
#include "dpcvm/models.hpp"
#include "dpcvm/rng.hpp"

namespace dpcvm {

enum class MultiplierLaw { mammen, rademacher };

std::string_view to_string(MultiplierLaw law);
MultiplierLaw parse_law(std::string_view name);

// Largest accepted condition number of Delta_{n,t}.
inline constexpr double max_delta_condition = 1e12;

// Residuals of one level with their projection onto the orthogonal
// complement of the score span:
//   e_pro = e - G Delta^{-1} (G' e / n),  Delta = G' G / n,
// applied as e - Q Q' e with Q an orthonormal basis from a QR of G.
class LevelProjection {
 public:
  // Score columns that are zero for every observation are removed first;
  // throws singular_delta when Delta of the rest is not safely invertible.
  LevelProjection(int level, double weight, Eigen::VectorXd e, Eigen::MatrixXd scores);

  int level() const { return level_; }
  double weight() const { return weight_; }
  const Eigen::VectorXd& e() const { return e_; }
  const Eigen::VectorXd& e_pro() const { return e_pro_; }
  // Scores with identically zero columns removed.
  const Eigen::MatrixXd& scores() const { return scores_; }
  const Eigen::MatrixXd& delta() const { return delta_; }
  double delta_cond() const { return delta_cond_; }

  // Applies the same projection to other residual vectors (columns of V).
  Eigen::MatrixXd project(const Eigen::MatrixXd& V) const;

 private:
  int level_;
  double weight_;
  Eigen::VectorXd e_;
  Eigen::MatrixXd scores_;
  Eigen::MatrixXd delta_;
  double delta_cond_ = 1.0;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd e_pro_;
};

struct ProjectedResiduals {
  Eigen::Index n = 0;
  std::vector<LevelProjection> levels;
};

ProjectedResiduals projected_residuals(const PropensityModel& model,
                                       const Dataset& data, const LevelSet& levels);

// sum_t a(t) / n^2 * e_pro_t' K e_pro_t for a symmetric kernel K.
double cvm_statistic(const ProjectedResiduals& pr, const Eigen::MatrixXd& K);
double cvm_statistic(const ProjectedResiduals& pr, const ProjectionKernel& kernel);

// Mammen: 1 - kappa with probability kappa / sqrt(5), else kappa, where
// kappa = (sqrt(5) + 1) / 2. Rademacher: +-1 with equal probability.
Eigen::VectorXd draw_multipliers(Eigen::Index n, MultiplierLaw law, Stream& rng);

struct BootstrapOptions {
  int B = 999;
  std::uint64_t seed = 0;
  MultiplierLaw law = MultiplierLaw::mammen;
  int threads = 1;
  StreamTag tag = StreamTag::bootstrap;
};

struct TestResult {
  std::string statistic_name = "dpro";
  double statistic = 0.0;
  std::vector<double> boot_stats;
  double p_value = 1.0;
  // (alpha, critical value) for alpha = 0.10, 0.05, 0.01.
  std::vector<std::pair<double, double>> critical_values;
  int B = 0;
  std::uint64_t seed = 0;
  MultiplierLaw law = MultiplierLaw::mammen;
  std::vector<int> levels;
  std::vector<double> weights;

  double critical_value(double alpha) const;
  // statistic > (1 - alpha) bootstrap quantile.
  bool rejects(double alpha) const;
};

// Inverse-CDF (type 1) empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double prob);

// One level of a multiplier-bootstrapped quadratic form: its projection and
// the kernel it is measured with.
struct QuadraticLevel {
  const LevelProjection* projection;
  const Eigen::MatrixXd* kernel;
};

// Replicate b draws V from substream (seed, tag, b), shared by all levels,
// sets e* = V o e, re-projects with the fixed scores and Delta, and
// evaluates sum_t a(t) / n^2 e*_pro' K_t e*_pro. No refitting, no kernel
// rebuild.
TestResult bootstrap_quadratic(std::span<const QuadraticLevel> levels,
                               double statistic, const BootstrapOptions& options);

TestResult multiplier_bootstrap(const ProjectedResiduals& pr,
                                const ProjectionKernel& kernel,
                                const BootstrapOptions& options);

struct TestConfig {
  std::optional<LevelSet> levels;  // defaults from LevelSet::defaults
  bool include_level0 = false;
  int B = 999;
  std::optional<std::uint64_t> seed;  // drawn from entropy when absent
  MultiplierLaw law = MultiplierLaw::mammen;
  int threads = 1;
  // The kernel uses X without its intercept column unless this is set.
  bool kernel_includes_intercept = false;
  double dup_tol = 1e-12;
  std::optional<simd::Backend> backend;
  std::optional<std::filesystem::path> cache_dir;
  // Externally estimated parameters; skips fitting.
  std::optional<Eigen::VectorXd> theta;
  std::optional<Eigen::VectorXd> init;
  FitOptions fit;
};

struct TestRun {
  TestResult result;
  Family family = Family::binary_logit;
  Eigen::VectorXd theta_hat;
  std::optional<FitResult> fit;  // absent when theta was supplied
  Eigen::Index n = 0;
  int d_x = 0;  // kernel dimension
};

// fit_mle -> an_matrix -> projected_residuals -> multiplier_bootstrap.
TestRun run_test(const Dataset& data, Family family, const TestConfig& config);

// Covariates handed to the kernel under the config's intercept rule.
Eigen::MatrixXd kernel_covariates(const Dataset& data, bool include_intercept);

}  // namespace dpcvm
