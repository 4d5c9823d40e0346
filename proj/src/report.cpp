#include "dpcvm/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "dpcvm/error.hpp"

namespace dpcvm::report {
namespace {

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string alpha_key(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", a);
  return buf;
}

json critical_values(const TestResult& r) {
  json cv = json::object();
  for (const auto& [a, c] : r.critical_values) cv[alpha_key(a)] = c;
  return cv;
}

json test_core(const TestResult& r) {
  return {{"statistic_name", r.statistic_name},
          {"statistic", r.statistic},
          {"p_value", r.p_value},
          {"critical_values", critical_values(r)},
          {"B", r.B},
          {"seed", r.seed},
          {"multiplier_law", std::string(to_string(r.law))},
          {"levels", r.levels},
          {"weights", r.weights}};
}

std::string pair_key(int t, int s) { return std::to_string(t) + "_" + std::to_string(s); }

// NaN and infinities have no JSON form.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json fit_document(const FitResult& fit, Eigen::Index n, Eigen::Index d) {
  return {{"command", "fit"},
          {"family", std::string(to_string(fit.family))},
          {"J", fit.J},
          {"n", n},
          {"d", d},
          {"theta_hat", vec(fit.theta_hat)},
          {"loglik", fit.loglik},
          {"gradient_norm", fit.gradient_norm},
          {"iterations", fit.iterations},
          {"converged", fit.converged}};
}

json test_document(const TestRun& run, const std::optional<TestResult>& baseline,
                   bool include_boot_stats) {
  json doc = test_core(run.result);
  doc["command"] = "test";
  doc["family"] = std::string(to_string(run.family));
  doc["n"] = run.n;
  doc["d_x"] = run.d_x;
  json fit = {{"theta_hat", vec(run.theta_hat)}};
  if (run.fit) {
    fit["loglik"] = run.fit->loglik;
    fit["converged"] = run.fit->converged;
    fit["iterations"] = run.fit->iterations;
  } else {
    fit["loglik"] = nullptr;
    fit["converged"] = nullptr;
    fit["supplied"] = true;
  }
  doc["fit"] = fit;
  if (include_boot_stats) doc["boot_stats"] = run.result.boot_stats;
  if (baseline) {
    json b = test_core(*baseline);
    if (include_boot_stats) b["boot_stats"] = baseline->boot_stats;
    doc["baseline"] = b;
  }
  return doc;
}

json ate_document(const AteResult& ate, Family family, Eigen::Index n) {
  return {{"command", "ate"},
          {"family", std::string(to_string(family))},
          {"n", n},
          {"t", ate.t},
          {"s", ate.s},
          {"estimate", ate.estimate},
          {"se", ate.se},
          {"ci", {ate.lower, ate.upper}},
          {"alpha", ate.alpha},
          {"B", ate.B},
          {"seed", ate.seed},
          {"failed_resamples", ate.failed_resamples},
          {"floored_probabilities", ate.floored}};
}

json simulate_document(const SimulationReport& report) {
  const auto& c = report.config;
  json cells = json::array();
  for (const auto& cell : report.cells) {
    json stats = json::array();
    for (const auto& s : cell.statistics) {
      json rates = json::object();
      for (std::size_t a = 0; a < c.alphas.size(); ++a) rates[alpha_key(c.alphas[a])] = s.reject_rates[a];
      stats.push_back({{"statistic", s.statistic}, {"reject_rate", rates}, {"p_values", s.p_values}});
    }
    json ates = json::array();
    for (const auto& a : cell.ates)
      ates.push_back({{"t", a.t},
                      {"s", a.s},
                      {"true_ate", a.true_ate},
                      {"bias", a.bias},
                      {"rmse", a.rmse},
                      {"coverage", number_or_null(a.coverage)}});
    cells.push_back({{"dgp", cell.dgp},
                     {"n", cell.n},
                     {"reps", cell.reps},
                     {"failed", cell.failed},
                     {"statistics", stats},
                     {"ates", ates}});
  }
  json ns = json::array();
  for (auto n : c.ns) ns.push_back(n);
  return {{"command", "simulate"},
          {"config",
           {{"dgps", c.dgps},
            {"ns", ns},
            {"reps", c.reps},
            {"B", c.B},
            {"ate_B", c.ate_B},
            {"alphas", c.alphas},
            {"seed", c.seed},
            {"multiplier_law", std::string(to_string(c.law))},
            {"baselines", c.baselines},
            {"ate", c.ate},
            {"kernel_includes_intercept", c.kernel_includes_intercept}}},
          {"cells", cells},
          {"timing", {{"wall_seconds", report.wall_seconds}}}};
}

std::string simulate_csv(const SimulationReport& report) {
  std::vector<std::pair<int, int>> pairs;
  std::set<std::pair<int, int>> seen;
  for (const auto& cell : report.cells)
    for (const auto& a : cell.ates)
      if (seen.insert({a.t, a.s}).second) pairs.emplace_back(a.t, a.s);

  auto fmt = [](double v) {
    if (!std::isfinite(v)) return std::string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "dgp,n,statistic";
  for (double a : report.config.alphas) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(std::lround(a * 100)));
    out << ",reject_rate_" << buf;
  }
  for (const auto& [t, s] : pairs)
    out << ",bias_" << pair_key(t, s) << ",rmse_" << pair_key(t, s) << ",cov_" << pair_key(t, s);
  out << '\n';
  for (const auto& cell : report.cells) {
    std::map<std::pair<int, int>, const AteCell*> by_pair;
    for (const auto& a : cell.ates) by_pair[{a.t, a.s}] = &a;
    for (const auto& s : cell.statistics) {
      out << cell.dgp << ',' << cell.n << ',' << s.statistic;
      for (double r : s.reject_rates) out << ',' << fmt(r);
      for (const auto& p : pairs) {
        const auto it = by_pair.find(p);
        if (it == by_pair.end()) {
          out << ",,,";
        } else {
          out << ',' << fmt(it->second->bias) << ',' << fmt(it->second->rmse) << ','
              << fmt(it->second->coverage);
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

namespace {

void need(std::vector<std::string>& errs, const json& obj, const char* key,
          bool (json::*pred)() const noexcept, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    errs.push_back(where + ": missing field '" + key + "'");
    return;
  }
  if (!(obj.at(key).*pred)()) errs.push_back(where + ": field '" + key + "' has the wrong type");
}

void check_test_core(std::vector<std::string>& errs, const json& d, const std::string& where) {
  need(errs, d, "statistic", &json::is_number, where);
  need(errs, d, "p_value", &json::is_number, where);
  need(errs, d, "critical_values", &json::is_object, where);
  need(errs, d, "B", &json::is_number_integer, where);
  need(errs, d, "seed", &json::is_number_unsigned, where);
  need(errs, d, "multiplier_law", &json::is_string, where);
  need(errs, d, "levels", &json::is_array, where);
  if (!errs.empty()) return;
  if (d["statistic"].get<double>() < 0.0) errs.push_back(where + ": negative statistic");
  const double p = d["p_value"].get<double>();
  if (!(p > 0.0 && p <= 1.0)) errs.push_back(where + ": p_value outside (0, 1]");
  const auto law = d["multiplier_law"].get<std::string>();
  if (law != "mammen" && law != "rademacher")
    errs.push_back(where + ": unknown multiplier_law");
  if (d["B"].get<long>() < 1) errs.push_back(where + ": B must be positive");
}

}  // namespace

std::vector<std::string> validate(const json& doc) {
  std::vector<std::string> errs;
  need(errs, doc, "command", &json::is_string, "document");
  if (!errs.empty()) return errs;
  const auto cmd = doc["command"].get<std::string>();
  if (cmd == "fit") {
    need(errs, doc, "family", &json::is_string, "fit");
    need(errs, doc, "theta_hat", &json::is_array, "fit");
    need(errs, doc, "loglik", &json::is_number, "fit");
    need(errs, doc, "converged", &json::is_boolean, "fit");
  } else if (cmd == "test") {
    check_test_core(errs, doc, "test");
    need(errs, doc, "family", &json::is_string, "test");
    need(errs, doc, "n", &json::is_number_integer, "test");
    need(errs, doc, "d_x", &json::is_number_integer, "test");
    need(errs, doc, "fit", &json::is_object, "test");
    if (doc.contains("fit") && doc["fit"].is_object())
      need(errs, doc["fit"], "theta_hat", &json::is_array, "test.fit");
    if (doc.contains("baseline")) check_test_core(errs, doc["baseline"], "test.baseline");
  } else if (cmd == "ate") {
    need(errs, doc, "estimate", &json::is_number, "ate");
    need(errs, doc, "se", &json::is_number, "ate");
    need(errs, doc, "ci", &json::is_array, "ate");
    need(errs, doc, "seed", &json::is_number_unsigned, "ate");
    if (errs.empty()) {
      const auto& ci = doc["ci"];
      if (ci.size() != 2 || !ci[0].is_number() || !ci[1].is_number() ||
          ci[0].get<double>() > ci[1].get<double>())
        errs.push_back("ate: ci must be [lower, upper] with lower <= upper");
    }
  } else if (cmd == "simulate") {
    need(errs, doc, "config", &json::is_object, "simulate");
    need(errs, doc, "cells", &json::is_array, "simulate");
    if (!errs.empty()) return errs;
    for (std::size_t i = 0; i < doc["cells"].size(); ++i) {
      const json& cell = doc["cells"][i];
      const std::string where = "simulate.cells[" + std::to_string(i) + "]";
      need(errs, cell, "dgp", &json::is_number_integer, where);
      need(errs, cell, "n", &json::is_number_integer, where);
      need(errs, cell, "statistics", &json::is_array, where);
      if (!cell.contains("statistics") || !cell["statistics"].is_array()) continue;
      for (const json& s : cell["statistics"]) {
        need(errs, s, "reject_rate", &json::is_object, where);
        if (!s.contains("reject_rate") || !s["reject_rate"].is_object()) continue;
        for (const auto& [k, v] : s["reject_rate"].items())
          if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0)
            errs.push_back(where + ": reject rate " + k + " outside [0, 1]");
      }
      if (cell.contains("ates") && cell["ates"].is_array())
        for (const json& a : cell["ates"])
          if (a.contains("bias") && a.contains("rmse") && a["rmse"].is_number() &&
              a["bias"].is_number() &&
              a["rmse"].get<double>() + 1e-12 < std::abs(a["bias"].get<double>()))
            errs.push_back(where + ": rmse below |bias|");
    }
  } else {
    errs.push_back("document: unknown command '" + cmd + "'");
  }
  return errs;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace dpcvm::report
