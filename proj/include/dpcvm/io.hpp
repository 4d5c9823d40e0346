#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpcvm/dataset.hpp"

namespace dpcvm {

// Comma-separated text with a header row. Fields may be double-quoted, with
// "" for a literal quote. Blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

struct ColumnBindings {
  std::string treatment;
  // Empty selects every column other than the treatment and outcome.
  std::vector<std::string> covariates;
  std::optional<std::string> outcome;
  // Prepend a constant column to the design.
  bool add_intercept = true;
};

// Errors name the offending column and the 1-based data row.
Dataset dataset_from_csv(const CsvTable& table, const ColumnBindings& bindings);

}  // namespace dpcvm
