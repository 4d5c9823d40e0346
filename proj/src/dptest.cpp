#include "dpcvm/dptest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpcvm/error.hpp"
#include "dpcvm/kernel_cache.hpp"
#include "dpcvm/parallel.hpp"

namespace dpcvm {
namespace {

// Replicates per batched GEMM. Fixed so that every replicate is computed by
// the same sequence of floating-point operations whatever the thread count.
constexpr int replicate_block = 32;

constexpr double alphas[] = {0.10, 0.05, 0.01};

}  // namespace

std::string_view to_string(MultiplierLaw law) {
  return law == MultiplierLaw::mammen ? "mammen" : "rademacher";
}

MultiplierLaw parse_law(std::string_view name) {
  if (name == "mammen") return MultiplierLaw::mammen;
  if (name == "rademacher") return MultiplierLaw::rademacher;
  fail(ErrorKind::invalid_argument,
       "unknown multiplier law '" + std::string(name) + "' (mammen, rademacher)");
}

LevelProjection::LevelProjection(int level, double weight, Eigen::VectorXd e,
                                 Eigen::MatrixXd scores)
    : level_(level), weight_(weight), e_(std::move(e)), scores_(std::move(scores)) {
  const Eigen::Index n = e_.size();
  if (n < 1) fail(ErrorKind::invalid_argument, "projection needs at least one residual");
  if (scores_.rows() != n)
    fail(ErrorKind::dimension_mismatch, "score matrix rows differ from residual length");
  if (!e_.allFinite() || !scores_.allFinite())
    fail(ErrorKind::data_error, "non-finite residuals or scores at level " +
                                    std::to_string(level));
  // Coordinates on which the score vanishes for every observation (the other
  // cutpoints of a cumulative level) span nothing and are dropped.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < scores_.cols(); ++c)
    if ((scores_.col(c).array() != 0.0).any()) keep.push_back(c);
  if (static_cast<Eigen::Index>(keep.size()) < scores_.cols()) {
    Eigen::MatrixXd kept(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      kept.col(static_cast<Eigen::Index>(k)) = scores_.col(keep[k]);
    scores_ = std::move(kept);
  }
  const double dn = static_cast<double>(n);
  delta_ = scores_.transpose() * scores_ / dn;
  if (scores_.cols() > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(delta_, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    delta_cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(delta_cond_ <= max_delta_condition))
      fail(ErrorKind::singular_delta,
           "Delta at level " + std::to_string(level) + " has condition number " +
               std::to_string(delta_cond_) + " (collinear scores?)");
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(scores_);
    basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(n, scores_.cols());
  }
  e_pro_ = project(e_);
}

Eigen::MatrixXd LevelProjection::project(const Eigen::MatrixXd& V) const {
  if (V.rows() != e_.size())
    fail(ErrorKind::dimension_mismatch, "projected vectors have the wrong length");
  if (scores_.cols() == 0) return V;
  const Eigen::MatrixXd coef = basis_.transpose() * V;
  return V - basis_ * coef;
}

ProjectedResiduals projected_residuals(const PropensityModel& model,
                                       const Dataset& data, const LevelSet& levels) {
  levels.validate(model);
  if (data.X.cols() != model.covariate_dim())
    fail(ErrorKind::dimension_mismatch, "design width differs from the model");
  if (data.T.size() != data.X.rows())
    fail(ErrorKind::dimension_mismatch, "treatment length differs from design rows");
  ProjectedResiduals pr;
  pr.n = data.n();
  pr.levels.reserve(levels.levels.size());
  for (std::size_t k = 0; k < levels.levels.size(); ++k) {
    const int t = levels.levels[k];
    pr.levels.emplace_back(t, levels.weights[k], model.residual_vector(data.X, data.T, t),
                           model.score_matrix(data.X, t));
  }
  return pr;
}

double cvm_statistic(const ProjectedResiduals& pr, const Eigen::MatrixXd& K) {
  if (K.rows() != pr.n || K.cols() != pr.n)
    fail(ErrorKind::dimension_mismatch, "kernel size differs from the residuals");
  const double n2 = static_cast<double>(pr.n) * static_cast<double>(pr.n);
  double total = 0.0;
  for (const auto& lv : pr.levels) {
    if (lv.weight() == 0.0) continue;
    const Eigen::VectorXd Ke = K.selfadjointView<Eigen::Lower>() * lv.e_pro();
    total += lv.weight() * lv.e_pro().dot(Ke) / n2;
  }
  // Round-off can leave a tiny negative value when e_pro is near the kernel's
  // null space.
  return std::max(total, 0.0);
}

double cvm_statistic(const ProjectedResiduals& pr, const ProjectionKernel& kernel) {
  return cvm_statistic(pr, kernel.A);
}

Eigen::VectorXd draw_multipliers(Eigen::Index n, MultiplierLaw law, Stream& rng) {
  if (n < 1) fail(ErrorKind::invalid_argument, "multiplier count must be positive");
  Eigen::VectorXd v(n);
  if (law == MultiplierLaw::rademacher) {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = (rng.next_u64() >> 63) ? 1.0 : -1.0;
    return v;
  }
  const double sqrt5 = std::sqrt(5.0);
  const double kappa = 0.5 * (sqrt5 + 1.0);
  const double p_low = kappa / sqrt5;
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform() < p_low ? 1.0 - kappa : kappa;
  return v;
}

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0))
    fail(ErrorKind::invalid_argument, "quantile probability outside [0, 1]");
  const auto m = values.size();
  auto k = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(m) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, m);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(k - 1), values.end());
  return values[k - 1];
}

double TestResult::critical_value(double alpha) const {
  for (const auto& [a, c] : critical_values)
    if (std::abs(a - alpha) < 1e-12) return c;
  if (boot_stats.empty()) fail(ErrorKind::invalid_argument, "no bootstrap replicates");
  return empirical_quantile(boot_stats, 1.0 - alpha);
}

bool TestResult::rejects(double alpha) const { return statistic > critical_value(alpha); }

TestResult bootstrap_quadratic(std::span<const QuadraticLevel> levels, double statistic,
                               const BootstrapOptions& options) {
  if (options.B < 1) fail(ErrorKind::invalid_argument, "B must be at least 1");
  if (levels.empty()) fail(ErrorKind::invalid_argument, "no levels to bootstrap");
  const Eigen::Index n = levels.front().projection->e().size();
  for (const auto& lv : levels)
    if (lv.projection->e().size() != n || lv.kernel->rows() != n || lv.kernel->cols() != n)
      fail(ErrorKind::dimension_mismatch, "bootstrap levels disagree on n");

  TestResult res;
  res.statistic = statistic;
  res.B = options.B;
  res.seed = options.seed;
  res.law = options.law;
  res.boot_stats.assign(static_cast<std::size_t>(options.B), 0.0);
  for (const auto& lv : levels) {
    res.levels.push_back(lv.projection->level());
    res.weights.push_back(lv.projection->weight());
  }

  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const int blocks = (options.B + replicate_block - 1) / replicate_block;
  parallel_for(static_cast<std::size_t>(blocks), resolve_threads(options.threads),
               [&](std::size_t blk) {
    const int b0 = static_cast<int>(blk) * replicate_block;
    const int m = std::min(replicate_block, options.B - b0);
    Eigen::MatrixXd V(n, m);
    for (int c = 0; c < m; ++c) {
      Stream rng = Stream::substream(options.seed, options.tag,
                                     static_cast<std::uint64_t>(b0 + c));
      V.col(c) = draw_multipliers(n, options.law, rng);
    }
    Eigen::VectorXd stats = Eigen::VectorXd::Zero(m);
    for (const auto& lv : levels) {
      const LevelProjection& p = *lv.projection;
      if (p.weight() == 0.0) continue;
      const Eigen::MatrixXd Ep = p.project(V.array().colwise() * p.e().array());
      Eigen::MatrixXd KE(n, m);
      KE.noalias() = *lv.kernel * Ep;
      stats += p.weight() / n2 * (Ep.array() * KE.array()).colwise().sum().matrix().transpose();
    }
    for (int c = 0; c < m; ++c)
      res.boot_stats[static_cast<std::size_t>(b0 + c)] = std::max(stats[c], 0.0);
  });

  long exceed = 0;
  for (double s : res.boot_stats)
    if (s >= statistic) ++exceed;
  res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(options.B + 1);
  for (double a : alphas)
    res.critical_values.emplace_back(a, empirical_quantile(res.boot_stats, 1.0 - a));
  return res;
}

TestResult multiplier_bootstrap(const ProjectedResiduals& pr, const ProjectionKernel& kernel,
                                const BootstrapOptions& options) {
  if (kernel.n != pr.n)
    fail(ErrorKind::dimension_mismatch, "kernel size differs from the residuals");
  std::vector<QuadraticLevel> levels;
  for (const auto& lv : pr.levels) levels.push_back({&lv, &kernel.A});
  TestResult res = bootstrap_quadratic(levels, cvm_statistic(pr, kernel), options);
  res.statistic_name = "dpro";
  return res;
}

Eigen::MatrixXd kernel_covariates(const Dataset& data, bool include_intercept) {
  if (include_intercept || !data.intercept_col || data.d() == 1) return data.X;
  return data.covariates_without_intercept();
}

TestRun run_test(const Dataset& data, Family family, const TestConfig& config) {
  data.validate(true);
  TestRun run;
  run.family = family;
  run.n = data.n();
  if (config.theta) {
    run.theta_hat = *config.theta;
  } else {
    run.fit = fit_mle(family, data, config.init, config.fit);
    run.theta_hat = run.fit->theta_hat;
  }
  const PropensityModel model(family, data.J, data.d(), run.theta_hat);
  const LevelSet levels =
      config.levels.value_or(LevelSet::defaults(family, data.J, config.include_level0));
  const ProjectedResiduals pr = projected_residuals(model, data, levels);

  const Eigen::MatrixXd Xk = kernel_covariates(data, config.kernel_includes_intercept);
  const KernelOptions kopt{config.dup_tol, config.threads, config.backend};
  const ProjectionKernel kernel = config.cache_dir
                                      ? kernel_cache::load_or_build(*config.cache_dir, Xk, kopt)
                                      : an_matrix(Xk, kopt);
  run.d_x = kernel.d_x;

  BootstrapOptions bopt;
  bopt.B = config.B;
  bopt.seed = config.seed.value_or(entropy_seed());
  bopt.law = config.law;
  bopt.threads = config.threads;
  run.result = multiplier_bootstrap(pr, kernel, bopt);
  return run;
}

}  // namespace dpcvm
