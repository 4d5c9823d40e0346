#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpcvm/dataset.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/models.hpp"

namespace dpcvm {

// Fitted probabilities below this are raised to it before weighting.
inline constexpr double probability_floor = 1e-6;

struct IpwEstimate {
  double estimate = 0.0;
  long floored = 0;  // observations whose probability hit the floor
};

// Hajek-normalized IPW contrast
//   sum_i (w_it / sum_j w_jt - w_is / sum_j w_js) Y_i,  w_it = 1(T_i = t) / q_t(X_i).
// Throws empty_group when level t or s is unobserved.
IpwEstimate ipw_ate_detail(const Dataset& data, const PropensityModel& model, int t, int s);

double ipw_ate(const Dataset& data, const PropensityModel& model, int t, int s);

struct AteOptions {
  int B = 499;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;
  FitOptions fit;
  // Resamples allowed to fail (missing level, separation, ...) before the
  // whole bootstrap is abandoned.
  double max_failed_fraction = 0.10;
  // Estimate for the full sample; fitted when absent. Also the warm start of
  // every refit.
  std::optional<Eigen::VectorXd> theta_hat;
};

struct AteResult {
  int t = 1;
  int s = 0;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  int B = 0;
  std::uint64_t seed = 0;
  int failed_resamples = 0;
  long floored = 0;
  std::vector<double> boot_estimates;  // successful resamples, in order
};

// Rows resampled with replacement from substream (seed, b); the propensity
// model is refitted on every resample. CI bounds are type-1 quantiles at
// alpha/2 and 1 - alpha/2; se is the sample standard deviation.
AteResult percentile_bootstrap(const Dataset& data, Family family, int t, int s,
                               const AteOptions& options);

}  // namespace dpcvm
