#include "dpcvm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpcvm/error.hpp"

namespace dpcvm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t column_index(const CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end())
    fail(ErrorKind::data_error, "column '" + name + "' not found in the CSV header");
  return static_cast<std::size_t>(it - t.header.begin());
}

double parse_number(const std::string& field, const std::string& column, std::size_t row) {
  const std::string s = trim(field);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
    fail(ErrorKind::data_error, "column '" + column + "', row " + std::to_string(row) +
                                    ": '" + field + "' is not a finite number");
  return v;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  auto end_field = [&] {
    rec.push_back(field);
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.size() == 1 && trim(rec[0]).empty())) records.push_back(rec);
    rec.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) fail(ErrorKind::data_error, "unterminated quoted field in CSV input");
  if (any && (!field.empty() || !rec.empty())) end_record();
  if (records.empty()) fail(ErrorKind::data_error, "CSV input has no header row");

  CsvTable t;
  for (const auto& h : records.front()) t.header.push_back(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      fail(ErrorKind::data_error, "row " + std::to_string(r) + " has " +
                                      std::to_string(records[r].size()) + " fields, header has " +
                                      std::to_string(t.header.size()));
    t.rows.push_back(records[r]);
  }
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

Dataset dataset_from_csv(const CsvTable& table, const ColumnBindings& bindings) {
  const std::size_t t_col = column_index(table, bindings.treatment);
  std::optional<std::size_t> y_col;
  if (bindings.outcome) y_col = column_index(table, *bindings.outcome);

  std::vector<std::size_t> x_cols;
  if (bindings.covariates.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != t_col && (!y_col || c != *y_col)) x_cols.push_back(c);
  } else {
    for (const auto& name : bindings.covariates) x_cols.push_back(column_index(table, name));
  }
  if (x_cols.empty() && !bindings.add_intercept)
    fail(ErrorKind::data_error, "no covariate columns selected");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index offset = bindings.add_intercept ? 1 : 0;
  Dataset d;
  d.X.resize(n, offset + static_cast<Eigen::Index>(x_cols.size()));
  d.T.resize(n);
  if (y_col) d.Y = Eigen::VectorXd(n);
  if (bindings.add_intercept) d.intercept_col = 0;

  const std::string& t_name = table.header[t_col];
  int J = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const auto r1 = static_cast<std::size_t>(i) + 1;
    const double tv = parse_number(row[t_col], t_name, r1);
    if (tv != std::floor(tv) || tv < 0.0 || tv > 1e6)
      fail(ErrorKind::data_error, "column '" + t_name + "', row " + std::to_string(r1) +
                                      ": treatment value '" + trim(row[t_col]) +
                                      "' is not a non-negative integer");
    d.T[i] = static_cast<int>(tv);
    J = std::max(J, d.T[i]);
    if (bindings.add_intercept) d.X(i, 0) = 1.0;
    for (std::size_t k = 0; k < x_cols.size(); ++k)
      d.X(i, offset + static_cast<Eigen::Index>(k)) =
          parse_number(row[x_cols[k]], table.header[x_cols[k]], r1);
    if (y_col) (*d.Y)[i] = parse_number(row[*y_col], table.header[*y_col], r1);
  }
  d.J = std::max(J, 1);
  return d;
}

}  // namespace dpcvm
