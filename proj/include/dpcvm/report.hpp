#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpcvm/dptest.hpp"
#include "dpcvm/effects.hpp"
#include "dpcvm/estimation.hpp"
#include "dpcvm/simulation.hpp"

namespace dpcvm::report {

using nlohmann::json;

// Result documents. Every document carries "command"; wall-clock timings
// live under "timing" so that the rest is reproducible byte for byte.
json fit_document(const FitResult& fit, Eigen::Index n, Eigen::Index d);
json test_document(const TestRun& run, const std::optional<TestResult>& baseline,
                   bool include_boot_stats = false);
json ate_document(const AteResult& ate, Family family, Eigen::Index n);
json simulate_document(const SimulationReport& report);

// One row per (dgp, n, statistic); ATE columns bias_t_s, rmse_t_s, cov_t_s
// for every pair in the report, blank where a design has no such pair.
std::string simulate_csv(const SimulationReport& report);

// Problems found in a document; empty when it is valid.
std::vector<std::string> validate(const json& doc);

// Two-space indented serialization with a trailing newline.
std::string dump(const json& doc);

}  // namespace dpcvm::report
