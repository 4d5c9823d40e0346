#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpcvm/baselines.hpp"
#include "dpcvm/dataset.hpp"
#include "dpcvm/dptest.hpp"
#include "dpcvm/models.hpp"
#include "dpcvm/rng.hpp"

namespace dpcvm {

inline constexpr int dgp_count = 15;

// Designs 1-5 are binary (probit null), 6-10 three-level unordered
// (multinomial logit null), 11-15 three-level ordered (ordered logit null).
// Designs 1, 6 and 11 satisfy their null.
struct DgpInfo {
  int id = 1;
  Family null_family = Family::binary_probit;
  int J = 1;
  bool null_holds = false;
  std::vector<std::pair<int, int>> ate_pairs;
  std::vector<double> true_ates;
  std::vector<SsVariant> baselines;
};

DgpInfo dgp_info(int id);

// Draws n observations with outcomes. Design matrices:
//   binary:      (1, X1..X10), intercept column 0
//   multinomial: (1, X1..X6),  intercept column 0
//   ordered:     (X1..X10); the cutpoints play the intercept's role
//
// Normals come from Stream::normal (Marsaglia polar). Binary T = 1(T* > 0);
// multi-level T is the first t with U < P(T <= t | X), U uniform on [0, 1).
//
// When potential_outcomes is given it receives the n x (J + 1) matrix of
// Y(0), ..., Y(J); the observed Y picks column T_i.
Dataset generate(int id, Eigen::Index n, Stream& rng,
                 Eigen::MatrixXd* potential_outcomes = nullptr);

struct ExperimentConfig {
  std::vector<int> dgps{1};
  std::vector<Eigen::Index> ns{200};
  int reps = 500;
  int B = 299;
  // Percentile-bootstrap draws for the ATE intervals; 0 skips the intervals
  // (bias and RMSE are still reported).
  int ate_B = 499;
  double ate_alpha = 0.05;
  std::vector<double> alphas{0.10, 0.05, 0.01};
  bool baselines = true;
  bool ate = true;
  std::uint64_t seed = 1;
  int threads = 1;
  MultiplierLaw law = MultiplierLaw::mammen;
  bool kernel_includes_intercept = false;
  // The experiment fails when more than this share of replicates errors.
  double max_failed_fraction = 0.01;

  // reps = 1000, B = 999.
  void use_full_scale() {
    reps = 1000;
    B = 999;
    ate_B = 499;
  }
};

struct StatisticCell {
  std::string statistic;  // "dpro", "ss", "ss1m", "ss2m", "sso"
  std::vector<double> reject_rates;  // one per config alpha
  std::vector<double> p_values;      // successful replicates, in order
};

struct AteCell {
  int t = 1;
  int s = 0;
  double true_ate = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;  // NaN when intervals were skipped
};

struct CellReport {
  int dgp = 1;
  Eigen::Index n = 0;
  int reps = 0;
  int failed = 0;
  std::vector<StatisticCell> statistics;
  std::vector<AteCell> ates;
};

struct SimulationReport {
  ExperimentConfig config;
  std::vector<CellReport> cells;
  double wall_seconds = 0.0;
};

// Replicate r of (dgp, n) runs on substreams of
// derive_seed(seed, {replicate tag, dgp, n, r}); results are aggregated in
// replicate order, so the report does not depend on the thread count.
SimulationReport run_experiment(const ExperimentConfig& config);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Kolmogorov-Smirnov distance between bootstrap p-values and the discrete
// uniform law on {(1 + k) / (B + 1) : k = 0..B}, with the asymptotic
// Kolmogorov p-value.
KsResult ks_discrete_uniform(const std::vector<double>& p_values, int B);

}  // namespace dpcvm
