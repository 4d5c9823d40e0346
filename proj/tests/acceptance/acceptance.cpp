// Acceptance runs: one pass/fail line per criterion. `--only N[,M...]`
// restricts the run; the exit status is non-zero when any selected
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpcvm/baselines.hpp"
#include "dpcvm/dptest.hpp"
#include "dpcvm/error.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/geometry.hpp"
#include "dpcvm/report.hpp"
#include "dpcvm/simulation.hpp"
#include "../support.hpp"

namespace fs = std::filesystem;
using namespace dpcvm;
using dpcvm::testing::full_model_dataset;
using dpcvm::testing::gaussian_vector;
using dpcvm::testing::mc_circle_angle;
using dpcvm::testing::random_theta;
using dpcvm::testing::oracle_aijr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

int worker_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

const Family all_families[] = {Family::binary_logit, Family::binary_probit,
                               Family::multinomial_logit, Family::ordered_logit};

int levels_of(Family f) { return dpcvm::testing::levels_for(f); }

double rate(const CellReport& cell, const std::string& stat, double alpha,
            const ExperimentConfig& cfg) {
  for (const auto& s : cell.statistics)
    if (s.statistic == stat)
      for (std::size_t a = 0; a < cfg.alphas.size(); ++a)
        if (std::abs(cfg.alphas[a] - alpha) < 1e-12) return s.reject_rates[a];
  throw std::runtime_error("statistic " + stat + " missing from the report");
}

const CellReport& cell_for(const SimulationReport& r, int dgp) {
  for (const auto& c : r.cells)
    if (c.dgp == dgp) return c;
  throw std::runtime_error("cell missing from the report");
}

ExperimentConfig desk_config(std::vector<int> dgps, Eigen::Index n, int reps, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.dgps = std::move(dgps);
  cfg.ns = {n};
  cfg.reps = reps;
  cfg.B = 299;
  cfg.ate = false;
  cfg.seed = seed;
  cfg.threads = worker_threads();
  return cfg;
}

// 1. aijr against Monte Carlo integration of the defining integral.
Outcome kernel_oracle() {
  Stream rng(1001);
  double worst = 0.0;
  int count = 0;
  for (int d : {1, 2, 3, 5, 10}) {
    for (int k = 0; k < 40; ++k) {
      Eigen::VectorXd xi = gaussian_vector(d, rng), xj = gaussian_vector(d, rng),
                      xr = gaussian_vector(d, rng);
      switch (k % 10) {
        case 0: xi = xr; break;
        case 1: xj = xi; break;
        case 2: xj = xr; break;
        case 3: xi = xr; xj = xr; break;
        default: break;
      }
      const double mc = mc_circle_angle(xi, xj, xr, 1000000, rng);
      worst = std::max(worst, std::abs(aijr_circle(xi, xj, xr) - mc));
      ++count;
    }
  }
  return {worst <= 0.01, std::to_string(count) + " triples, max |A0 - MC| = " + fmt("%.5f", worst)};
}

// 2. Matrix form against the naive triple sum.
Outcome closed_form() {
  Stream rng(1002);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Family f = all_families[k % 4];
    const int J = levels_of(f);
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(21));
    const Eigen::Index n_cov = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Eigen::Index d = f == Family::ordered_logit ? n_cov : n_cov + 1;
    const Eigen::VectorXd theta = random_theta(f, J, d, rng);
    const Dataset data = full_model_dataset(f, n, n_cov, J, theta, rng);
    const PropensityModel m(f, J, d, theta);
    const ProjectedResiduals pr = projected_residuals(m, data, LevelSet::defaults(f, J));
    const Eigen::MatrixXd X = kernel_covariates(data, false);
    const double fast = cvm_statistic(pr, an_matrix(X));
    double slow = 0.0;
    for (const auto& lv : pr.levels) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index r = 0; r < n; ++r)
            s += lv.e_pro()[i] * lv.e_pro()[j] *
                 oracle_aijr(X.row(i).transpose(), X.row(j).transpose(), X.row(r).transpose());
      slow += lv.weight() * s / static_cast<double>(n * n);
    }
    worst = std::max(worst, std::abs(fast - slow) / std::abs(slow));
  }
  return {worst <= 1e-10, "50 instances, max relative gap " + fmt("%.2e", worst)};
}

// 3. Score orthogonality of projected residuals on fitted instances.
Outcome orthogonality() {
  Stream rng(1003);
  double worst = 0.0;
  int fits = 0;
  auto check = [&](Family f, const Dataset& data) {
    const FitResult fit = fit_mle(f, data);
    const PropensityModel m = fit.model(data.d());
    const ProjectedResiduals pr =
        projected_residuals(m, data, LevelSet::defaults(f, data.J, f != Family::ordered_logit));
    for (const auto& lv : pr.levels) {
      const Eigen::MatrixXd G = m.score_matrix(data.X, lv.level());
      worst = std::max(worst, (G.transpose() * lv.e_pro()).cwiseAbs().maxCoeff());
    }
    ++fits;
  };
  for (Family f : all_families)
    for (int k = 0; k < 25; ++k) {
      const int J = levels_of(f);
      const Eigen::Index n_cov = 1 + k % 4;
      const Eigen::Index d = f == Family::ordered_logit ? n_cov : n_cov + 1;
      const Eigen::Index n = 50 + 15 * k;
      check(f, full_model_dataset(f, n, n_cov, J, random_theta(f, J, d, rng), rng));
    }
  for (int id = 1; id <= dgp_count; ++id) {
    Stream gen(derive_seed(1003, {static_cast<std::uint64_t>(id)}));
    check(dgp_info(id).null_family, generate(id, 200, gen));
  }
  return {worst <= 1e-8, std::to_string(fits) + " fits, max |sum g e_pro| = " + fmt("%.2e", worst)};
}

// 4. Analytic scores against central differences.
Outcome scores() {
  Stream rng(1004);
  double worst = 0.0;
  for (Family f : all_families)
    for (int k = 0; k < 100; ++k) {
      const int J = f == Family::binary_logit || f == Family::binary_probit ? 1 : 2 + k % 2;
      const Eigen::Index d = 2 + k % 4;
      const PropensityModel m(f, J, d, random_theta(f, J, d, rng));
      const Eigen::RowVectorXd x = gaussian_vector(d, rng).transpose();
      for (int t = 0; t < m.residual_level_count(); ++t) {
        const Eigen::VectorXd g = m.score(x, t);
        const double h = 1e-6;
        for (Eigen::Index c = 0; c < m.num_params(); ++c) {
          Eigen::VectorXd tp = m.theta(), tm = m.theta();
          tp[c] += h;
          tm[c] -= h;
          const PropensityModel mp(f, J, d, tp), mm(f, J, d, tm);
          const bool level = m.residual_kind() == ResidualKind::level;
          const double fp = level ? mp.prob(x)[t] : mp.cumulative(x)[t];
          const double fm = level ? mm.prob(x)[t] : mm.cumulative(x)[t];
          const double fd = (fp - fm) / (2 * h);
          const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-3);
          worst = std::max(worst, std::abs(g[c] - fd) / scale);
        }
      }
    }
  return {worst <= 1e-5, "400 configurations, max relative gap " + fmt("%.2e", worst)};
}

// 5. Size, binary.
Outcome size_binary() {
  ExperimentConfig cfg = desk_config({1}, 200, 500, 2005);
  cfg.baselines = false;
  const SimulationReport r = run_experiment(cfg);
  const double s = rate(r.cells[0], "dpro", 0.05, cfg);
  return {within(s, 0.03, 0.08), "DGP1 n=200: dpro size " + fmt("%.3f", s) + " (band [0.03, 0.08])"};
}

// 6. Power, binary, against the ss baseline on the same replicates.
Outcome power_binary() {
  const ExperimentConfig cfg = desk_config({2}, 400, 300, 2006);
  const SimulationReport r = run_experiment(cfg);
  const double dp = rate(r.cells[0], "dpro", 0.05, cfg), ss = rate(r.cells[0], "ss", 0.05, cfg);
  return {dp >= 0.95 && ss <= 0.40,
          "DGP2 n=400: dpro " + fmt("%.3f", dp) + " (>= 0.95), ss " + fmt("%.3f", ss) + " (<= 0.40)"};
}

// 7. Multinomial size and power.
Outcome multinomial() {
  ExperimentConfig cfg = desk_config({6, 7}, 200, 300, 2007);
  cfg.baselines = false;
  const SimulationReport r = run_experiment(cfg);
  const double size = rate(cell_for(r, 6), "dpro", 0.05, cfg);
  const double power = rate(cell_for(r, 7), "dpro", 0.05, cfg);
  return {within(size, 0.03, 0.09) && power >= 0.95,
          "DGP6 size " + fmt("%.3f", size) + " ([0.03, 0.09]), DGP7 power " + fmt("%.3f", power) +
              " (>= 0.95)"};
}

// 8. Ordered size, power and baseline.
Outcome ordered() {
  const ExperimentConfig cfg = desk_config({11, 12}, 200, 300, 2008);
  const SimulationReport r = run_experiment(cfg);
  const double size = rate(cell_for(r, 11), "dpro", 0.05, cfg);
  const double power = rate(cell_for(r, 12), "dpro", 0.05, cfg);
  const double base = rate(cell_for(r, 12), "sso", 0.05, cfg);
  return {within(size, 0.03, 0.09) && power >= 0.90 && base <= 0.30,
          "DGP11 size " + fmt("%.3f", size) + " ([0.03, 0.09]), DGP12 power " + fmt("%.3f", power) +
              " (>= 0.90), sso " + fmt("%.3f", base) + " (<= 0.30)"};
}

// 9. ATE bias, RMSE and percentile-bootstrap coverage.
Outcome ate_pipeline() {
  ExperimentConfig cfg = desk_config({1}, 400, 500, 2009);
  cfg.baselines = false;
  cfg.ate = true;
  cfg.ate_B = 499;
  const SimulationReport r = run_experiment(cfg);
  const AteCell& a = r.cells[0].ates.at(0);
  const bool pass = std::abs(a.bias) <= 0.07 && within(a.rmse, 0.4, 0.62) && within(a.coverage, 0.92, 0.98);
  return {pass, "DGP1 n=400: bias " + fmt("%.4f", a.bias) + " (|.| <= 0.07), RMSE " + fmt("%.3f", a.rmse) +
                    " ([0.4, 0.62]), coverage " + fmt("%.3f", a.coverage) + " ([0.92, 0.98])"};
}

// 10. Mammen multiplier law.
Outcome mammen() {
  Stream rng(1010);
  const Eigen::VectorXd v = draw_multipliers(1000000, MultiplierLaw::mammen, rng);
  const double kappa = (std::sqrt(5.0) + 1.0) / 2.0;
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
  const std::set<double> support(v.data(), v.data() + v.size());
  const bool exact = support == std::set<double>{1.0 - kappa, kappa};
  return {std::abs(mean) <= 0.005 && std::abs(var - 1.0) <= 0.01 && exact,
          "mean " + fmt("%.5f", mean) + ", variance " + fmt("%.5f", var) +
              (exact ? ", support {1-kappa, kappa}" : ", support differs")};
}

// 11. Byte-identical command output across repeats and thread counts.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "dpcvm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    Stream gen(1011);
    const Dataset d = generate(6, 150, gen);
    std::ofstream out(dir / "data.csv");
    out.precision(17);
    out << "x1,x2,x3,x4,x5,x6,T,y\n";
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      for (int k = 1; k <= 6; ++k) out << d.X(i, k) << ',';
      out << d.T[i] << ',' << (*d.Y)[i] << '\n';
    }
  }
  const std::string in = (dir / "data.csv").string();
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "fit -i " + in + " -f mlogit"},
      {"test", "test -i " + in + " -f mlogit -B 199 -s 5 --baseline default"},
      {"ate", "ate -i " + in + " -f mlogit --outcome y --pair 2,0 -B 99 -s 5"},
      {"simulate", "simulate --dgp 1,11 --n 100 --reps 4 -B 49 --ate-bootstrap 19 -s 3"}};

  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  auto numeric_part = [&](const fs::path& p) {
    auto doc = nlohmann::json::parse(slurp(p));
    doc.erase("timing");
    return doc.dump();
  };

  std::string bad;
  for (const auto& [name, args] : commands) {
    std::vector<std::string> outputs, tables;
    for (int threads : {1, 4, 1}) {
      const fs::path out = dir / (name + std::to_string(outputs.size()) + ".json");
      const fs::path csv = dir / (name + std::to_string(outputs.size()) + ".csv");
      std::string cmd = std::string(DPCVM_CLI) + " " + args + " -t " + std::to_string(threads) +
                        " -o " + out.string();
      if (name == "simulate") cmd += " --csv " + csv.string();
      cmd += " 2> /dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        bad += name + " failed; ";
        break;
      }
      // Only the simulate report carries wall-clock timing.
      outputs.push_back(name == "simulate" ? numeric_part(out) : slurp(out));
      if (name == "simulate") tables.push_back(slurp(csv));
    }
    for (std::size_t k = 1; k < outputs.size(); ++k)
      if (outputs[k] != outputs[0]) bad += name + " output differs; ";
    for (std::size_t k = 1; k < tables.size(); ++k)
      if (tables[k] != tables[0]) bad += name + " CSV differs; ";
  }
  fs::remove_all(dir);
  return {bad.empty(), bad.empty() ? "fit, test, ate, simulate identical at 1, 4, 1 threads" : bad};
}

// 12. Null p-values against the discrete uniform law.
Outcome uniformity() {
  ExperimentConfig cfg = desk_config({1, 6, 11}, 400, 500, 2012);
  cfg.B = 999;
  cfg.baselines = false;
  const SimulationReport r = run_experiment(cfg);
  bool pass = true;
  std::string detail;
  for (const auto& cell : r.cells) {
    const KsResult ks = ks_discrete_uniform(cell.statistics.at(0).p_values, cfg.B);
    pass = pass && ks.p_value >= 0.01;
    detail += "DGP" + std::to_string(cell.dgp) + " KS p " + fmt("%.3f", ks.p_value) + "; ";
  }
  return {pass, detail + "level 0.01"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpcvm acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "kernel oracle", kernel_oracle},
      {2, "closed-form equivalence", closed_form},
      {3, "exact orthogonality", orthogonality},
      {4, "score correctness", scores},
      {5, "size, binary", size_binary},
      {6, "power, binary", power_binary},
      {7, "size + power, multinomial", multinomial},
      {8, "size + power, ordered", ordered},
      {9, "ATE pipeline", ate_pipeline},
      {10, "Mammen multiplier law", mammen},
      {11, "determinism", determinism},
      {12, "null p-value uniformity", uniformity},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
