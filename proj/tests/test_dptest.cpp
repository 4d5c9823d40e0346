#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dpcvm/dptest.hpp"
#include "dpcvm/error.hpp"
#include "dpcvm/estimation.hpp"
#include "support.hpp"

using namespace dpcvm;
using dpcvm::testing::full_model_dataset;
using dpcvm::testing::gaussian_matrix;
using dpcvm::testing::gaussian_vector;
using dpcvm::testing::levels_for;
using dpcvm::testing::random_theta;
using dpcvm::testing::oracle_aijr;

namespace {

const Family all_families[] = {Family::binary_logit, Family::binary_probit,
                               Family::multinomial_logit, Family::ordered_logit};

// Sum over t of a(t) / n^2 sum_{i,j,r} e_i e_j aijr, straight from the
// definition.
double triple_sum(const ProjectedResiduals& pr, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  double total = 0.0;
  for (const auto& lv : pr.levels) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index r = 0; r < n; ++r)
          s += lv.e_pro()[i] * lv.e_pro()[j] *
               oracle_aijr(X.row(i).transpose(), X.row(j).transpose(), X.row(r).transpose());
    total += lv.weight() * s / static_cast<double>(n * n);
  }
  return total;
}

struct Fitted {
  Dataset data;
  FitResult fit;
  PropensityModel model;
};

Fitted fitted_instance(Family f, Eigen::Index n, Eigen::Index n_cov, Stream& rng) {
  const int J = levels_for(f);
  const Eigen::Index d = f == Family::ordered_logit ? n_cov : n_cov + 1;
  Dataset data = full_model_dataset(f, n, n_cov, J, random_theta(f, J, d, rng), rng);
  FitResult fit = fit_mle(f, data);
  PropensityModel model = fit.model(data.d());
  return {std::move(data), std::move(fit), std::move(model)};
}

}  // namespace

TEST(DpTest, HandProjectionExample) {
  Eigen::VectorXd e(4);
  e << 1, -1, 1, -1;
  const LevelProjection same(1, 1.0, e, Eigen::MatrixXd::Ones(4, 1));
  EXPECT_NEAR(same.delta()(0, 0), 1.0, 1e-15);
  EXPECT_LE((same.e_pro() - e).cwiseAbs().maxCoeff(), 1e-15);

  Eigen::MatrixXd g(4, 1);
  g << 1, 1, 1, -1;
  const LevelProjection flipped(1, 1.0, e, g);
  Eigen::VectorXd expect(4);
  expect << 0.5, -1.5, 0.5, -0.5;
  EXPECT_LE((flipped.e_pro() - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DpTest, ZeroResidualsProjectToZeroWithUnitPValue) {
  Stream rng(41);
  const Eigen::MatrixXd G = gaussian_matrix(30, 3, rng);
  const LevelProjection lv(1, 1.0, Eigen::VectorXd::Zero(30), G);
  EXPECT_TRUE(lv.e_pro().isZero(0.0));
  const ProjectionKernel k = an_matrix(gaussian_matrix(30, 2, rng));
  ProjectedResiduals pr{30, {lv}};
  EXPECT_EQ(cvm_statistic(pr, k), 0.0);
  BootstrapOptions opt;
  opt.B = 99;
  opt.seed = 5;
  const TestResult r = multiplier_bootstrap(pr, k, opt);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(DpTest, SinglePointStatistic) {
  // A score that is zero everywhere is dropped, leaving e_pro = e.
  for (int d : {1, 2, 5}) {
    const LevelProjection lv(1, 2.5, Eigen::VectorXd::Constant(1, 0.3), Eigen::MatrixXd::Zero(1, 1));
    ProjectedResiduals pr{1, {lv}};
    const ProjectionKernel k = an_matrix(Eigen::MatrixXd::Ones(1, d));
    EXPECT_NEAR(cvm_statistic(pr, k), 2.5 * 0.09 * 2 * M_PI * sphere_factor(d), 1e-14);
  }
}

TEST(DpTest, MatrixFormEqualsTripleSum) {
  Stream rng(42);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(26));
    const int d = 1 + static_cast<int>(rng.below(4));
    const Eigen::MatrixXd X = gaussian_matrix(n, d, rng);
    ProjectedResiduals pr{n, {}};
    const int levels = 1 + k % 2;
    for (int t = 0; t < levels; ++t)
      pr.levels.emplace_back(t + 1, 0.5 + t, gaussian_vector(n, rng), gaussian_matrix(n, 2, rng));
    const double fast = cvm_statistic(pr, an_matrix(X));
    const double slow = triple_sum(pr, X);
    EXPECT_NEAR(fast, slow, 1e-10 * std::abs(slow)) << "instance " << k;
  }
}

TEST(DpTest, ProjectedResidualsOrthogonalToScores) {
  Stream rng(43);
  for (Family f : all_families) {
    for (int k = 0; k < 10; ++k) {
      const Fitted fi = fitted_instance(f, 200, 3, rng);
      const LevelSet ls = LevelSet::defaults(f, fi.model.J(), f != Family::ordered_logit);
      const ProjectedResiduals pr = projected_residuals(fi.model, fi.data, ls);
      for (const auto& lv : pr.levels) {
        const Eigen::MatrixXd G = fi.model.score_matrix(fi.data.X, lv.level());
        EXPECT_LE((G.transpose() * lv.e_pro()).cwiseAbs().maxCoeff(), 1e-8)
            << to_string(f) << " level " << lv.level();
      }
    }
  }
}

TEST(DpTest, SingularDeltaOnCollinearScores) {
  Stream rng(44);
  Eigen::MatrixXd G = gaussian_matrix(40, 3, rng);
  G.col(2) = G.col(1);
  try {
    LevelProjection(1, 1.0, gaussian_vector(40, rng), G);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular_delta);
  }

  Dataset data;
  data.J = 1;
  data.X = Eigen::MatrixXd::Ones(40, 3);
  data.X.col(1) = gaussian_vector(40, rng);
  data.X.col(2) = data.X.col(1);
  data.T = Eigen::VectorXi::Zero(40);
  data.T.head(15).setOnes();
  const PropensityModel m(Family::binary_logit, 1, 3, Eigen::VectorXd::Zero(3));
  EXPECT_THROW(projected_residuals(m, data, LevelSet::defaults(Family::binary_logit, 1)), Error);
}

TEST(DpTest, StatisticInvariantToScoreReparameterization) {
  Stream rng(45);
  for (Family f : all_families) {
    const Fitted fi = fitted_instance(f, 120, 3, rng);
    const LevelSet ls = LevelSet::defaults(f, fi.model.J());
    const ProjectionKernel k = an_matrix(kernel_covariates(fi.data, false));
    const double base = cvm_statistic(projected_residuals(fi.model, fi.data, ls), k);

    const Eigen::Index d = fi.data.d();
    const Eigen::MatrixXd M = gaussian_matrix(d, d, rng) + 2.0 * Eigen::MatrixXd::Identity(d, d);
    Dataset moved = fi.data;
    moved.X = fi.data.X * M;
    moved.intercept_col.reset();
    const FitResult refit = fit_mle(f, moved);
    const double other = cvm_statistic(projected_residuals(refit.model(d), moved, ls), k);
    EXPECT_NEAR(other, base, 1e-8 * std::max(1.0, base)) << to_string(f);
  }
}

TEST(DpTest, MammenMomentsAndSupport) {
  Stream rng(46);
  const Eigen::VectorXd v = draw_multipliers(1000000, MultiplierLaw::mammen, rng);
  const double kappa = (std::sqrt(5.0) + 1.0) / 2.0;
  EXPECT_NEAR(v.mean(), 0.0, 0.005);
  EXPECT_NEAR((v.array() - v.mean()).square().sum() / (v.size() - 1), 1.0, 0.01);
  const std::set<double> support(v.data(), v.data() + v.size());
  EXPECT_EQ(support, (std::set<double>{1.0 - kappa, kappa}));
  const double low_share = (v.array() < 0.0).cast<double>().mean();
  EXPECT_NEAR(low_share, kappa / std::sqrt(5.0), 0.002);
}

TEST(DpTest, RademacherSupportAndDeterminism) {
  Stream a(47), b(47);
  const Eigen::VectorXd v = draw_multipliers(10000, MultiplierLaw::rademacher, a);
  EXPECT_TRUE((v.array().abs() == 1.0).all());
  EXPECT_NEAR(v.mean(), 0.0, 0.05);
  EXPECT_TRUE(v == draw_multipliers(10000, MultiplierLaw::rademacher, b));
  Stream c(48), d(48);
  EXPECT_TRUE(draw_multipliers(500, MultiplierLaw::mammen, c) ==
              draw_multipliers(500, MultiplierLaw::mammen, d));
}

TEST(DpTest, TypeOneQuantile) {
  std::vector<double> v{7, 3, 1, 9, 5, 2, 8, 10, 4, 6};
  EXPECT_EQ(empirical_quantile(v, 0.90), 9.0);
  EXPECT_EQ(empirical_quantile(v, 0.95), 10.0);
  EXPECT_EQ(empirical_quantile(v, 0.10), 1.0);
  EXPECT_EQ(empirical_quantile(v, 0.11), 2.0);
  EXPECT_EQ(empirical_quantile(v, 0.0), 1.0);
  EXPECT_EQ(empirical_quantile(v, 1.0), 10.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), Error);
}

TEST(DpTest, BootstrapContract) {
  Stream rng(49);
  const Fitted fi = fitted_instance(Family::binary_logit, 150, 3, rng);
  TestConfig cfg;
  cfg.B = 199;
  cfg.seed = 77;
  cfg.threads = 1;
  const TestRun one = run_test(fi.data, Family::binary_logit, cfg);
  const TestResult& r = one.result;
  EXPECT_GE(r.statistic, 0.0);
  ASSERT_EQ(r.boot_stats.size(), 199u);
  for (double s : r.boot_stats) EXPECT_GE(s, 0.0);
  const double k = r.p_value * 200.0 - 1.0;
  EXPECT_NEAR(k, std::round(k), 1e-9);
  EXPECT_GE(std::round(k), 0.0);
  EXPECT_LE(std::round(k), 199.0);
  long ge = 0;
  for (double s : r.boot_stats) ge += s >= r.statistic;
  EXPECT_EQ(r.p_value, (1.0 + ge) / 200.0);
  for (auto [a, c] : r.critical_values) {
    EXPECT_EQ(c, empirical_quantile(r.boot_stats, 1.0 - a));
    EXPECT_EQ(r.rejects(a), r.statistic > c);
  }
  EXPECT_EQ(r.seed, 77u);
  EXPECT_EQ(one.d_x, 3);

  cfg.threads = 3;
  const TestRun three = run_test(fi.data, Family::binary_logit, cfg);
  EXPECT_EQ(three.result.boot_stats, r.boot_stats);
  EXPECT_EQ(three.result.statistic, r.statistic);

  cfg.seed = 78;
  EXPECT_NE(run_test(fi.data, Family::binary_logit, cfg).result.boot_stats, r.boot_stats);
}

TEST(DpTest, BootstrapReusesKernelAndDelta) {
  Stream rng(50);
  const Fitted fi = fitted_instance(Family::binary_probit, 200, 4, rng);
  const ProjectedResiduals pr =
      projected_residuals(fi.model, fi.data, LevelSet::defaults(Family::binary_probit, 1));
  const auto t0 = std::chrono::steady_clock::now();
  const ProjectionKernel k = an_matrix(kernel_covariates(fi.data, false));
  const auto t1 = std::chrono::steady_clock::now();
  const long builds = kernel_build_count();
  BootstrapOptions opt;
  opt.B = 999;
  opt.seed = 3;
  const TestResult r = multiplier_bootstrap(pr, k, opt);
  const auto t2 = std::chrono::steady_clock::now();
  EXPECT_EQ(kernel_build_count(), builds);
  EXPECT_EQ(r.boot_stats.size(), 999u);
  const double ratio = std::chrono::duration<double>(t2 - t1).count() /
                       std::chrono::duration<double>(t1 - t0).count();
  RecordProperty("bootstrap_to_kernel_ratio", std::to_string(ratio));
  std::printf("bootstrap / kernel wall time at n = 200, B = 999: %.3f\n", ratio);
}

TEST(DpTest, SuppliedThetaSkipsFitting) {
  Stream rng(51);
  const Fitted fi = fitted_instance(Family::binary_logit, 100, 2, rng);
  TestConfig cfg;
  cfg.B = 49;
  cfg.seed = 1;
  cfg.theta = fi.fit.theta_hat;
  const TestRun run = run_test(fi.data, Family::binary_logit, cfg);
  EXPECT_FALSE(run.fit.has_value());
  cfg.theta.reset();
  const TestRun fitted = run_test(fi.data, Family::binary_logit, cfg);
  EXPECT_TRUE(fitted.fit.has_value());
  EXPECT_NEAR(run.result.statistic, fitted.result.statistic, 1e-12);
}

TEST(DpTest, MissingLevelFails) {
  Dataset d;
  d.J = 1;
  d.X = Eigen::MatrixXd::Ones(30, 1);
  d.T = Eigen::VectorXi::Zero(30);
  d.intercept_col = 0;
  TestConfig cfg;
  cfg.B = 9;
  cfg.seed = 1;
  EXPECT_THROW(run_test(d, Family::binary_logit, cfg), Error);
}

TEST(DpTest, SizeCalibrationOnCorrectLogit) {
  Stream rng(52);
  Eigen::VectorXd theta(4);
  theta << 0.2, 0.5, -0.5, 0.3;
  int kept = 0;
  for (int s = 0; s < 100; ++s) {
    const Dataset data = full_model_dataset(Family::binary_logit, 500, 3, 1, theta, rng);
    TestConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(1000 + s);
    kept += run_test(data, Family::binary_logit, cfg).result.p_value > 0.01;
  }
  EXPECT_GE(kept, 98);
}
