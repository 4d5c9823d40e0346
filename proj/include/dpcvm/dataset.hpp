#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace dpcvm {

// Treatment assignment data: model design X (n x d), treatment levels T in
// {0..J}, optional outcome Y.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXi T;
  std::optional<Eigen::VectorXd> Y;
  int J = 1;
  // Column of X holding the constant 1, when the design has one. The
  // projection kernel drops it by default.
  std::optional<int> intercept_col;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  // Throws data_error on non-finite X/Y, out-of-range T, n < d + 1 or a
  // length mismatch. With require_all_levels, every level 0..J must appear.
  void validate(bool require_all_levels) const;

  std::vector<Eigen::Index> level_counts() const;

  // X without the intercept column (or X itself when there is none).
  Eigen::MatrixXd covariates_without_intercept() const;

  // Rows selected by index, in the given order (used for resampling).
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace dpcvm
