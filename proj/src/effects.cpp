#include "dpcvm/effects.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpcvm/dptest.hpp"
#include "dpcvm/error.hpp"
#include "dpcvm/parallel.hpp"
#include "dpcvm/rng.hpp"

namespace dpcvm {

IpwEstimate ipw_ate_detail(const Dataset& data, const PropensityModel& model, int t, int s) {
  if (!data.Y) fail(ErrorKind::data_error, "treatment effects need an outcome column");
  if (t < 0 || s < 0 || t > model.J() || s > model.J())
    fail(ErrorKind::invalid_argument, "level pair (" + std::to_string(t) + ", " +
                                          std::to_string(s) + ") out of range");
  if (data.X.cols() != model.covariate_dim())
    fail(ErrorKind::dimension_mismatch, "design width differs from the model");
  const Eigen::VectorXd& Y = *data.Y;
  const Eigen::Index n = data.n();

  IpwEstimate out;
  double wt = 0.0, ws = 0.0, yt = 0.0, ys = 0.0;
  long nt = 0, ns = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ti = data.T[i];
    if (ti != t && ti != s) continue;
    double q = model.prob(data.X.row(i))[ti];
    if (q < probability_floor) {
      q = probability_floor;
      ++out.floored;
    }
    const double w = 1.0 / q;
    if (ti == t) {
      wt += w;
      yt += w * Y[i];
      ++nt;
    } else {
      ws += w;
      ys += w * Y[i];
      ++ns;
    }
  }
  if (nt == 0) fail(ErrorKind::empty_group, "no observation at level " + std::to_string(t));
  if (ns == 0) fail(ErrorKind::empty_group, "no observation at level " + std::to_string(s));
  if (!(wt > 0.0 && ws > 0.0 && std::isfinite(wt) && std::isfinite(ws)))
    fail(ErrorKind::degenerate_weights, "inverse-probability weights do not sum to a positive finite value");
  out.estimate = t == s ? 0.0 : yt / wt - ys / ws;
  return out;
}

double ipw_ate(const Dataset& data, const PropensityModel& model, int t, int s) {
  return ipw_ate_detail(data, model, t, s).estimate;
}

AteResult percentile_bootstrap(const Dataset& data, Family family, int t, int s,
                               const AteOptions& options) {
  if (options.B < 1) fail(ErrorKind::invalid_argument, "B must be at least 1");
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    fail(ErrorKind::invalid_argument, "alpha must lie in (0, 1)");
  data.validate(true);

  const Eigen::VectorXd theta = options.theta_hat
                                    ? *options.theta_hat
                                    : fit_mle(family, data, std::nullopt, options.fit).theta_hat;
  const PropensityModel model(family, data.J, data.d(), theta);
  const IpwEstimate full = ipw_ate_detail(data, model, t, s);

  AteResult res;
  res.t = t;
  res.s = s;
  res.estimate = full.estimate;
  res.floored = full.floored;
  res.alpha = options.alpha;
  res.B = options.B;
  res.seed = options.seed;

  const Eigen::Index n = data.n();
  std::vector<double> est(static_cast<std::size_t>(options.B), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(options.B), 0);
  parallel_for(static_cast<std::size_t>(options.B), resolve_threads(options.threads),
               [&](std::size_t b) {
    Stream rng = Stream::substream(options.seed, StreamTag::ate_resample, b);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Dataset boot = data.subset(rows);
    try {
      boot.validate(true);
      const FitResult fit = fit_mle(family, boot, theta, options.fit);
      const PropensityModel m(family, boot.J, boot.d(), fit.theta_hat);
      est[b] = ipw_ate(boot, m, t, s);
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;
    }
  });

  for (std::size_t b = 0; b < est.size(); ++b)
    if (ok[b]) res.boot_estimates.push_back(est[b]);
  res.failed_resamples = options.B - static_cast<int>(res.boot_estimates.size());
  if (res.failed_resamples > options.max_failed_fraction * options.B ||
      res.boot_estimates.empty())
    fail(ErrorKind::too_many_failed_resamples,
         std::to_string(res.failed_resamples) + " of " + std::to_string(options.B) +
             " bootstrap resamples failed to fit");

  const auto& v = res.boot_estimates;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  res.se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  res.lower = empirical_quantile(v, options.alpha / 2.0);
  res.upper = empirical_quantile(v, 1.0 - options.alpha / 2.0);
  return res;
}

}  // namespace dpcvm
