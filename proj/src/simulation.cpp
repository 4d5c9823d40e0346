#include "dpcvm/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dpcvm/effects.hpp"
#include "dpcvm/error.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/geometry.hpp"
#include "dpcvm/links.hpp"
#include "dpcvm/parallel.hpp"

namespace dpcvm {
namespace {

void check_id(int id) {
  if (id < 1 || id > dgp_count)
    fail(ErrorKind::invalid_argument,
         "unknown DGP " + std::to_string(id) + " (expected 1.." + std::to_string(dgp_count) + ")");
}

// X1 = Z1, X2 = (Z1 + Z2) / sqrt(2), Xk = Zk.
void binary_covariates(Stream& rng, double* x) {
  for (int k = 0; k < 10; ++k) x[k] = rng.normal();
  x[1] = (x[0] + x[1]) / std::numbers::sqrt2;
}

double sum(const double* x, int from, int to) {
  double s = 0.0;
  for (int k = from; k < to; ++k) s += x[k];
  return s;
}

double sum_sq(const double* x, int from, int to) {
  double s = 0.0;
  for (int k = from; k < to; ++k) s += x[k] * x[k];
  return s;
}

Dataset generate_binary(int id, Eigen::Index n, Stream& rng, Eigen::MatrixXd* po) {
  Dataset d;
  d.J = 1;
  d.intercept_col = 0;
  d.X.resize(n, 11);
  d.T.resize(n);
  d.Y = Eigen::VectorXd(n);
  if (po) po->resize(n, d.J + 1);
  double x[10];
  for (Eigen::Index i = 0; i < n; ++i) {
    binary_covariates(rng, x);
    const double eps = rng.normal();
    const double s10 = sum(x, 0, 10);
    double index = 0.0;
    switch (id) {
      case 1: index = -s10 / 6.0; break;
      case 2: index = -1.0 - s10 / 10.0 + x[0] * x[1] / 2.0; break;
      case 3: index = -1.0 - s10 / 10.0 + x[0] * sum(x, 1, 5) / 4.0; break;
      case 4: index = -1.5 - s10 / 6.0 + sum_sq(x, 0, 10) / 10.0; break;
      case 5: index = (-0.1 + 0.1 * sum(x, 0, 5)) / std::exp(-0.2 * s10); break;
    }
    const int t = index - eps > 0.0 ? 1 : 0;
    const double m1 = 1.0 + s10;
    const double y0 = m1 + rng.normal();
    const double y1 = 2.0 * m1 + rng.normal();
    d.X(i, 0) = 1.0;
    for (int k = 0; k < 10; ++k) d.X(i, k + 1) = x[k];
    d.T[i] = t;
    (*d.Y)[i] = t == 1 ? y1 : y0;
    if (po) po->row(i) << y0, y1;
  }
  return d;
}

// First t with u < P(T <= t), else the top level.
int draw_level(double u, double c0, double c1) {
  if (u < c0) return 0;
  if (u < c1) return 1;
  return 2;
}

Dataset generate_multinomial(int id, Eigen::Index n, Stream& rng, Eigen::MatrixXd* po) {
  // Cholesky factor of [[2, 1, -1], [1, 1, -0.5], [-1, -0.5, 1]].
  const double r2 = std::numbers::sqrt2, h = std::sqrt(0.5);
  const double L[3][3] = {{r2, 0.0, 0.0}, {1.0 / r2, h, 0.0}, {-1.0 / r2, 0.0, h}};
  const double beta0[6] = {-6, -6, -6, 6, 6, 6};

  Dataset d;
  d.J = 2;
  d.intercept_col = 0;
  d.X.resize(n, 7);
  d.T.resize(n);
  d.Y = Eigen::VectorXd(n);
  if (po) po->resize(n, d.J + 1);
  double x[6];
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z[3] = {rng.normal(), rng.normal(), rng.normal()};
    for (int a = 0; a < 3; ++a) x[a] = L[a][0] * z[0] + L[a][1] * z[1] + L[a][2] * z[2];
    x[3] = rng.uniform(-3.0, 3.0);
    const double z5 = rng.normal();
    x[4] = z5 * z5;
    x[5] = rng.uniform() < 0.5 ? 1.0 : 0.0;

    const double s6 = sum(x, 0, 6), s3 = sum(x, 0, 3);
    double phi1 = 0.0, phi2 = 0.0;
    switch (id) {
      case 6: phi1 = -1.0 + 0.4 * s6; phi2 = -1.0 + 0.2 * s6; break;
      case 7: phi1 = -0.2 * s6 + x[0] * x[5]; phi2 = -0.1 * s6 + x[0] * x[3]; break;
      case 8: phi1 = 0.3 * s6; phi2 = -0.5 + 0.1 * sum_sq(x, 0, 6); break;
      case 9:
        phi1 = -0.1 + s6 / 5.0 + x[5] * s3 / 2.0;
        phi2 = -0.3 * s6 - x[5] * (x[3] + x[4]) / 2.0;
        break;
      case 10: phi1 = std::sin(s6) + s3; phi2 = 2.0 * std::sin(s6) + s3 / 2.0; break;
    }
    const double top = std::max({0.0, phi1, phi2});
    const double e0 = std::exp(-top), e1 = std::exp(phi1 - top), e2 = std::exp(phi2 - top);
    const double tot = e0 + e1 + e2;
    const int t = draw_level(rng.uniform(), e0 / tot, (e0 + e1) / tot);

    double xb0 = 0.0;
    for (int k = 0; k < 6; ++k) xb0 += x[k] * beta0[k];
    const double y0 = 1.0 + xb0 + rng.normal();
    const double y1 = 20.0 - xb0 + rng.normal();
    const double y2 = 6.0 + 4.0 * s6 + rng.normal();
    d.X(i, 0) = 1.0;
    for (int k = 0; k < 6; ++k) d.X(i, k + 1) = x[k];
    d.T[i] = t;
    (*d.Y)[i] = t == 0 ? y0 : (t == 1 ? y1 : y2);
    if (po) po->row(i) << y0, y1, y2;
  }
  return d;
}

Dataset generate_ordered(int id, Eigen::Index n, Stream& rng, Eigen::MatrixXd* po) {
  const double scale = std::numbers::pi / std::sqrt(3.0);
  Dataset d;
  d.J = 2;
  d.X.resize(n, 10);
  d.T.resize(n);
  d.Y = Eigen::VectorXd(n);
  if (po) po->resize(n, d.J + 1);
  double x[10];
  for (Eigen::Index i = 0; i < n; ++i) {
    binary_covariates(rng, x);
    const double s10 = sum(x, 0, 10);
    double phi = 0.0, gamma = 1.0, a0 = 0.0, a1 = 0.0;
    switch (id) {
      case 11: phi = -s10 / 8.0; a0 = -1.0; a1 = 0.5; break;
      case 12: phi = s10 / 10.0 - x[0] * x[1]; a0 = -1.2; a1 = 0.0; break;
      case 13: phi = -s10 / 10.0 + x[0] * sum(x, 1, 5) / 2.0; a0 = 0.0; a1 = 1.5; break;
      case 14: phi = -s10 / 6.0 + sum_sq(x, 0, 10) / 10.0; a0 = 0.0; a1 = 1.5; break;
      case 15:
        phi = 0.1 * sum(x, 0, 5);
        gamma = std::exp(-0.2 * s10);
        a0 = -0.5;
        a1 = 1.0;
        break;
    }
    const double c0 = links::logistic(scale * (a0 - phi) / gamma);
    const double c1 = links::logistic(scale * (a1 - phi) / gamma);
    const int t = draw_level(rng.uniform(), c0, c1);

    double xb0 = 0.0;
    for (int k = 0; k < 10; ++k) xb0 += (k < 5 ? -4.0 : 4.0) * x[k];
    const double y0 = 1.0 + xb0 + rng.normal();
    const double y1 = 2.0 - xb0 + rng.normal();
    const double y2 = 3.0 + 3.0 * s10 + rng.normal();
    for (int k = 0; k < 10; ++k) d.X(i, k) = x[k];
    d.T[i] = t;
    (*d.Y)[i] = t == 0 ? y0 : (t == 1 ? y1 : y2);
    if (po) po->row(i) << y0, y1, y2;
  }
  return d;
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct ReplicateOutcome {
  bool ok = false;
  std::vector<double> p_values;            // per statistic
  std::vector<std::vector<char>> rejects;  // per statistic, per alpha
  std::vector<double> ate;                 // per pair
  std::vector<char> covered;               // per pair
};

ReplicateOutcome run_replicate(const ExperimentConfig& cfg, const DgpInfo& info,
                               Eigen::Index n, std::uint64_t rep_seed) {
  ReplicateOutcome out;
  Stream gen(derive_seed(rep_seed, {static_cast<std::uint64_t>(StreamTag::dgp)}));
  const Dataset data = generate(info.id, n, gen);
  data.validate(true);
  const FitResult fit = fit_mle(info.null_family, data);
  const PropensityModel model = fit.model(data.d());
  const std::uint64_t boot_seed =
      derive_seed(rep_seed, {static_cast<std::uint64_t>(StreamTag::bootstrap)});

  auto record = [&](const TestResult& r) {
    out.p_values.push_back(r.p_value);
    std::vector<char> rej;
    for (double a : cfg.alphas) rej.push_back(r.rejects(a) ? 1 : 0);
    out.rejects.push_back(std::move(rej));
  };

  const LevelSet levels = LevelSet::defaults(info.null_family, info.J);
  const ProjectedResiduals pr = projected_residuals(model, data, levels);
  const ProjectionKernel kernel =
      an_matrix(kernel_covariates(data, cfg.kernel_includes_intercept));
  BootstrapOptions bopt;
  bopt.B = cfg.B;
  bopt.seed = boot_seed;
  bopt.law = cfg.law;
  record(multiplier_bootstrap(pr, kernel, bopt));

  if (cfg.baselines)
    for (SsVariant v : info.baselines) {
      SsTestSpec spec;
      spec.variant = v;
      spec.B = cfg.B;
      spec.seed = boot_seed;
      spec.law = cfg.law;
      record(ss_bootstrap(model, data, spec));
    }

  if (cfg.ate)
    for (std::size_t k = 0; k < info.ate_pairs.size(); ++k) {
      const auto [t, s] = info.ate_pairs[k];
      if (cfg.ate_B > 0) {
        AteOptions aopt;
        aopt.B = cfg.ate_B;
        aopt.alpha = cfg.ate_alpha;
        aopt.seed = derive_seed(rep_seed, {static_cast<std::uint64_t>(StreamTag::ate_resample), k});
        aopt.theta_hat = fit.theta_hat;
        const AteResult r = percentile_bootstrap(data, info.null_family, t, s, aopt);
        out.ate.push_back(r.estimate);
        out.covered.push_back(r.lower <= info.true_ates[k] && info.true_ates[k] <= r.upper);
      } else {
        out.ate.push_back(ipw_ate(data, model, t, s));
        out.covered.push_back(0);
      }
    }
  out.ok = true;
  return out;
}

std::vector<std::string> statistic_names(const ExperimentConfig& cfg, const DgpInfo& info) {
  std::vector<std::string> names{"dpro"};
  if (cfg.baselines)
    for (SsVariant v : info.baselines) names.emplace_back(statistic_name(v));
  return names;
}

}  // namespace

DgpInfo dgp_info(int id) {
  check_id(id);
  DgpInfo info;
  info.id = id;
  if (id <= 5) {
    info.null_family = Family::binary_probit;
    info.J = 1;
    info.null_holds = id == 1;
    info.ate_pairs = {{1, 0}};
    info.true_ates = {1.0};
    info.baselines = {SsVariant::binary};
  } else if (id <= 10) {
    info.null_family = Family::multinomial_logit;
    info.J = 2;
    info.null_holds = id == 6;
    info.ate_pairs = {{1, 0}, {2, 0}};
    info.true_ates = {1.0, 2.0};
    info.baselines = {SsVariant::multinomial_joint, SsVariant::multinomial_marginal};
  } else {
    info.null_family = Family::ordered_logit;
    info.J = 2;
    info.null_holds = id == 11;
    info.ate_pairs = {{1, 0}, {2, 0}};
    info.true_ates = {1.0, 2.0};
    info.baselines = {SsVariant::ordered};
  }
  return info;
}

Dataset generate(int id, Eigen::Index n, Stream& rng, Eigen::MatrixXd* potential_outcomes) {
  check_id(id);
  if (n < 50) fail(ErrorKind::invalid_argument, "simulated samples need n >= 50");
  if (id <= 5) return generate_binary(id, n, rng, potential_outcomes);
  if (id <= 10) return generate_multinomial(id, n, rng, potential_outcomes);
  return generate_ordered(id, n, rng, potential_outcomes);
}

SimulationReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.reps < 1) fail(ErrorKind::invalid_argument, "reps must be at least 1");
  if (cfg.B < 1) fail(ErrorKind::invalid_argument, "B must be at least 1");
  if (cfg.ate_B < 0) fail(ErrorKind::invalid_argument, "ate_B must be non-negative");
  if (cfg.dgps.empty() || cfg.ns.empty())
    fail(ErrorKind::invalid_argument, "no DGPs or sample sizes requested");
  for (double a : cfg.alphas)
    if (!(a > 0.0 && a < 1.0)) fail(ErrorKind::invalid_argument, "alpha outside (0, 1)");
  for (int id : cfg.dgps) check_id(id);
  for (Eigen::Index n : cfg.ns)
    if (n < 50) fail(ErrorKind::invalid_argument, "simulated samples need n >= 50");

  const auto start = std::chrono::steady_clock::now();
  SimulationReport report;
  report.config = cfg;
  const int threads = resolve_threads(cfg.threads);

  for (int id : cfg.dgps) {
    const DgpInfo info = dgp_info(id);
    const auto names = statistic_names(cfg, info);
    for (Eigen::Index n : cfg.ns) {
      std::vector<ReplicateOutcome> reps(static_cast<std::size_t>(cfg.reps));
      parallel_for(reps.size(), threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(
            cfg.seed, {static_cast<std::uint64_t>(StreamTag::replicate),
                       static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(n), r});
        try {
          reps[r] = run_replicate(cfg, info, n, rep_seed);
        } catch (const Error&) {
          reps[r].ok = false;
        }
      });

      CellReport cell;
      cell.dgp = id;
      cell.n = n;
      for (const auto& r : reps) (r.ok ? cell.reps : cell.failed) += 1;
      if (cell.failed > cfg.max_failed_fraction * cfg.reps || cell.reps == 0)
        fail(ErrorKind::too_many_failed_replicates,
             "DGP " + std::to_string(id) + ", n = " + std::to_string(n) + ": " +
                 std::to_string(cell.failed) + " of " + std::to_string(cfg.reps) +
                 " replicates failed");
      const double ok = cell.reps;

      for (std::size_t k = 0; k < names.size(); ++k) {
        StatisticCell sc;
        sc.statistic = names[k];
        sc.reject_rates.assign(cfg.alphas.size(), 0.0);
        for (const auto& r : reps) {
          if (!r.ok) continue;
          sc.p_values.push_back(r.p_values[k]);
          for (std::size_t a = 0; a < cfg.alphas.size(); ++a) sc.reject_rates[a] += r.rejects[k][a];
        }
        for (double& v : sc.reject_rates) v /= ok;
        cell.statistics.push_back(std::move(sc));
      }

      if (cfg.ate)
        for (std::size_t k = 0; k < info.ate_pairs.size(); ++k) {
          AteCell ac;
          ac.t = info.ate_pairs[k].first;
          ac.s = info.ate_pairs[k].second;
          ac.true_ate = info.true_ates[k];
          CompensatedSum err, sq;
          long cover = 0;
          for (const auto& r : reps) {
            if (!r.ok) continue;
            const double e = r.ate[k] - ac.true_ate;
            err.add(e);
            sq.add(e * e);
            cover += r.covered[k];
          }
          ac.bias = err.value() / ok;
          ac.rmse = std::sqrt(sq.value() / ok);
          ac.coverage = cfg.ate_B > 0 ? cover / ok : std::numeric_limits<double>::quiet_NaN();
          cell.ates.push_back(ac);
        }
      report.cells.push_back(std::move(cell));
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

KsResult ks_discrete_uniform(const std::vector<double>& p_values, int B) {
  if (p_values.empty()) fail(ErrorKind::invalid_argument, "no p-values");
  if (B < 1) fail(ErrorKind::invalid_argument, "B must be at least 1");
  std::vector<double> p = p_values;
  std::sort(p.begin(), p.end());
  const double m = static_cast<double>(p.size());
  const double atoms = B + 1.0;

  // Both CDFs are step functions jumping only at the atoms (1 + k) / (B + 1),
  // so the supremum is attained at an atom.
  double D = 0.0;
  std::size_t idx = 0;
  for (int k = 0; k <= B; ++k) {
    const double atom = (1.0 + k) / atoms;
    while (idx < p.size() && p[idx] <= atom + 1e-12) ++idx;
    D = std::max(D, std::abs(static_cast<double>(idx) / m - (1.0 + k) / atoms));
  }

  // Kolmogorov tail with the Stephens small-sample correction.
  const double sm = std::sqrt(m);
  const double lambda = (sm + 0.12 + 0.11 / sm) * D;
  double q = 0.0;
  if (lambda < 0.2) {
    q = 1.0;
  } else {
    for (int j = 1; j <= 100; ++j) {
      const double term = std::exp(-2.0 * j * j * lambda * lambda);
      q += (j % 2 ? 2.0 : -2.0) * term;
      if (term < 1e-16) break;
    }
  }
  return {D, std::clamp(q, 0.0, 1.0)};
}

}  // namespace dpcvm
