// dpcvm: fit propensity models, run the double-projection specification
// test, estimate IPW treatment effects and run simulation studies.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpcvm/baselines.hpp"
#include "dpcvm/dptest.hpp"
#include "dpcvm/effects.hpp"
#include "dpcvm/error.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/io.hpp"
#include "dpcvm/report.hpp"
#include "dpcvm/simulation.hpp"

namespace {

using namespace dpcvm;

enum Exit { ok = 0, usage = 2, data = 2, numeric = 3, nonconvergence = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_converged:
      return nonconvergence;
    case ErrorKind::separation_detected:
    case ErrorKind::singular_hessian:
    case ErrorKind::singular_delta:
    case ErrorKind::degenerate_weights:
    case ErrorKind::too_many_failed_resamples:
    case ErrorKind::too_many_failed_replicates:
      return numeric;
    default:
      return data;
  }
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& what) {
  std::vector<T> out;
  for (const auto& item : split(s)) {
    std::istringstream in(item);
    T v{};
    if (!(in >> v) || !in.eof())
      fail(ErrorKind::invalid_argument, what + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  return out;
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    fail(ErrorKind::invalid_argument, std::string(name) + " must be an integer");
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io_error, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorKind::io_error, "write to '" + path + "' failed");
}

struct DataOptions {
  std::string input;
  std::string treatment = "T";
  std::string covariates;
  std::string outcome;
  bool no_intercept = false;
  std::string family = "logit";
};

void add_data_options(CLI::App* cmd, DataOptions& o, bool outcome) {
  cmd->add_option("-i,--input", o.input, "CSV file with a header row")->required();
  cmd->add_option("--treatment", o.treatment, "treatment column (integers 0..J)");
  cmd->add_option("--covariates", o.covariates,
                  "comma-separated covariate columns (default: all others)");
  if (outcome) cmd->add_option("--outcome", o.outcome, "outcome column")->required();
  cmd->add_flag("--no-intercept", o.no_intercept, "do not add a constant column");
  cmd->add_option("-f,--family", o.family, "logit, probit, mlogit or ologit");
}

Dataset load(const DataOptions& o, Family family) {
  ColumnBindings b;
  b.treatment = o.treatment;
  b.covariates = split(o.covariates);
  if (!o.outcome.empty()) b.outcome = o.outcome;
  // Ordered cutpoints already act as intercepts.
  b.add_intercept = !o.no_intercept && family != Family::ordered_logit;
  Dataset d = dataset_from_csv(read_csv(o.input), b);
  d.validate(true);
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double-projection Cramer-von Mises specification tests for propensity scores"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  std::string output;
  app.add_option("-t,--threads", threads, "worker threads (0: DPCVM_THREADS or all cores)");
  app.add_option("-o,--output", output, "output path (default: stdout)");

  DataOptions fit_o, test_o, ate_o;

  auto* fit_cmd = app.add_subcommand("fit", "maximum-likelihood propensity fit");
  add_data_options(fit_cmd, fit_o, false);

  auto* test_cmd = app.add_subcommand("test", "double-projection specification test");
  add_data_options(test_cmd, test_o, false);
  int B = 999;
  std::optional<std::uint64_t> seed;
  std::string law = "mammen", levels, weights, theta, baseline, cache_dir;
  bool include_level0 = false, kernel_intercept = false, boot_stats = false;
  double dup_tol = 1e-12;
  test_cmd->add_option("-B,--bootstrap", B, "bootstrap replicates");
  test_cmd->add_option("-s,--seed", seed, "64-bit seed (drawn and reported when absent)");
  test_cmd->add_option("--law", law, "multiplier law: mammen or rademacher");
  test_cmd->add_option("--levels", levels, "comma-separated levels in the statistic");
  test_cmd->add_option("--weights", weights, "comma-separated level weights");
  test_cmd->add_flag("--include-level0", include_level0,
                     "add level 0 to the default levels (unordered families)");
  test_cmd->add_flag("--kernel-intercept", kernel_intercept,
                     "keep the constant column in the projection kernel");
  test_cmd->add_option("--theta", theta, "comma-separated parameters; skips fitting");
  test_cmd->add_option("--baseline", baseline,
                       "also run a single-projection test: binary, multinomial_joint, "
                       "multinomial_marginal, ordered or 'default'");
  test_cmd->add_option("--cache-dir", cache_dir, "kernel cache directory (or DPCVM_CACHE_DIR)");
  test_cmd->add_option("--dup-tol", dup_tol, "distance below which points are tied");
  test_cmd->add_flag("--boot-stats", boot_stats, "include bootstrap replicates in the output");

  auto* ate_cmd = app.add_subcommand("ate", "IPW average treatment effect with bootstrap CI");
  add_data_options(ate_cmd, ate_o, true);
  int ate_B = 499;
  double alpha = 0.05;
  std::string pair = "1,0";
  std::optional<std::uint64_t> ate_seed;
  ate_cmd->add_option("-B,--bootstrap", ate_B, "percentile bootstrap resamples");
  ate_cmd->add_option("-s,--seed", ate_seed, "64-bit seed");
  ate_cmd->add_option("--alpha", alpha, "1 - confidence level");
  ate_cmd->add_option("--pair", pair, "levels t,s for the contrast t vs s");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study over DGP1-DGP15");
  std::string dgps = "1", ns = "200", csv, alphas = "0.10,0.05,0.01";
  int reps = 500, sim_B = 299, sim_ate_B = 499;
  std::uint64_t sim_seed = 1;
  bool paper_scale = false, no_baselines = false, no_ate = false, sim_kernel_intercept = false;
  std::string sim_law = "mammen";
  sim_cmd->add_option("--dgp", dgps, "comma-separated DGP ids (1-15)");
  sim_cmd->add_option("--n", ns, "comma-separated sample sizes");
  sim_cmd->add_option("--reps", reps, "Monte Carlo replications");
  sim_cmd->add_option("-B,--bootstrap", sim_B, "multiplier bootstrap replicates");
  sim_cmd->add_option("--ate-bootstrap", sim_ate_B, "percentile bootstrap draws (0: no CI)");
  sim_cmd->add_option("--alphas", alphas, "comma-separated test levels");
  sim_cmd->add_option("-s,--seed", sim_seed, "master seed");
  sim_cmd->add_option("--law", sim_law, "multiplier law");
  sim_cmd->add_option("--csv", csv, "also write the table as CSV to this path");
  sim_cmd->add_flag("--paper-scale", paper_scale, "reps = 1000, B = 999");
  sim_cmd->add_flag("--no-baselines", no_baselines, "skip single-projection tests");
  sim_cmd->add_flag("--no-ate", no_ate, "skip treatment effects");
  sim_cmd->add_flag("--kernel-intercept", sim_kernel_intercept,
                    "keep the constant column in the projection kernel");

  auto* val_cmd = app.add_subcommand("validate", "check a result document against its schema");
  std::string doc_path;
  val_cmd->add_option("document", doc_path, "JSON result file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  try {
    if (threads == 0) threads = env_int("DPCVM_THREADS", 0);

    if (*fit_cmd) {
      const Family family = parse_family(fit_o.family);
      const Dataset d = load(fit_o, family);
      const FitResult fit = fit_mle(family, d);
      write_output(output, report::dump(report::fit_document(fit, d.n(), d.d())));
    } else if (*test_cmd) {
      const Family family = parse_family(test_o.family);
      const Dataset d = load(test_o, family);
      TestConfig cfg;
      cfg.B = B;
      cfg.seed = seed ? *seed : entropy_seed();
      cfg.law = parse_law(law);
      cfg.threads = threads;
      cfg.include_level0 = include_level0;
      cfg.kernel_includes_intercept = kernel_intercept;
      cfg.dup_tol = dup_tol;
      if (!levels.empty()) {
        LevelSet ls;
        ls.levels = parse_list<int>(levels, "--levels");
        ls.weights = weights.empty() ? std::vector<double>(ls.levels.size(), 1.0)
                                     : parse_list<double>(weights, "--weights");
        cfg.levels = ls;
      } else if (!weights.empty()) {
        fail(ErrorKind::invalid_argument, "--weights needs --levels");
      }
      if (!theta.empty()) {
        const auto v = parse_list<double>(theta, "--theta");
        cfg.theta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      if (cache_dir.empty())
        if (const char* env = std::getenv("DPCVM_CACHE_DIR"); env && *env) cache_dir = env;
      if (!cache_dir.empty()) cfg.cache_dir = cache_dir;

      const TestRun run = run_test(d, family, cfg);
      std::optional<TestResult> base;
      if (!baseline.empty()) {
        SsTestSpec spec;
        spec.variant = baseline == "default" ? default_ss_variant(family) : parse_ss_variant(baseline);
        spec.levels = cfg.levels;
        spec.B = cfg.B;
        spec.seed = *cfg.seed;
        spec.law = cfg.law;
        spec.threads = threads;
        base = ss_bootstrap(PropensityModel(family, d.J, d.d(), run.theta_hat), d, spec);
      }
      write_output(output, report::dump(report::test_document(run, base, boot_stats)));
    } else if (*ate_cmd) {
      const Family family = parse_family(ate_o.family);
      const Dataset d = load(ate_o, family);
      const auto ts = parse_list<int>(pair, "--pair");
      if (ts.size() != 2) fail(ErrorKind::invalid_argument, "--pair needs two levels t,s");
      AteOptions opt;
      opt.B = ate_B;
      opt.alpha = alpha;
      opt.seed = ate_seed ? *ate_seed : entropy_seed();
      opt.threads = threads;
      const AteResult r = percentile_bootstrap(d, family, ts[0], ts[1], opt);
      if (r.floored > 0)
        std::cerr << "warning: " << r.floored << " fitted probabilities raised to "
                  << probability_floor << "\n";
      if (r.failed_resamples > 0)
        std::cerr << "warning: " << r.failed_resamples << " bootstrap resamples failed to fit\n";
      write_output(output, report::dump(report::ate_document(r, family, d.n())));
    } else if (*sim_cmd) {
      ExperimentConfig cfg;
      cfg.dgps = parse_list<int>(dgps, "--dgp");
      cfg.ns.clear();
      for (long n : parse_list<long>(ns, "--n")) cfg.ns.push_back(n);
      cfg.reps = reps;
      cfg.B = sim_B;
      cfg.ate_B = sim_ate_B;
      if (paper_scale) cfg.use_full_scale();
      cfg.alphas = parse_list<double>(alphas, "--alphas");
      cfg.seed = sim_seed;
      cfg.threads = threads;
      cfg.law = parse_law(sim_law);
      cfg.baselines = !no_baselines;
      cfg.ate = !no_ate;
      cfg.kernel_includes_intercept = sim_kernel_intercept;
      const SimulationReport rep = run_experiment(cfg);
      write_output(output, report::dump(report::simulate_document(rep)));
      if (!csv.empty()) write_output(csv, report::simulate_csv(rep));
    } else if (*val_cmd) {
      std::ifstream in(doc_path);
      if (!in) fail(ErrorKind::io_error, "cannot open '" + doc_path + "'");
      report::json doc;
      try {
        doc = report::json::parse(in);
      } catch (const report::json::exception& e) {
        fail(ErrorKind::data_error, std::string("invalid JSON: ") + e.what());
      }
      const auto problems = report::validate(doc);
      for (const auto& p : problems) std::cerr << p << "\n";
      if (!problems.empty()) return data;
      std::cout << "valid\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return data;
  }
  return ok;
}
