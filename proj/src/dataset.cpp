#include "dpcvm/dataset.hpp"

#include <string>

#include "dpcvm/error.hpp"

namespace dpcvm {

void Dataset::validate(bool require_all_levels) const {
  const Eigen::Index rows = X.rows();
  if (J < 1) fail(ErrorKind::data_error, "J must be at least 1");
  if (T.size() != rows)
    fail(ErrorKind::data_error, "treatment length " + std::to_string(T.size()) +
                                    " does not match " + std::to_string(rows) +
                                    " covariate rows");
  if (Y && Y->size() != rows)
    fail(ErrorKind::data_error, "outcome length does not match covariate rows");
  if (rows < X.cols() + 1)
    fail(ErrorKind::data_error, "need n >= d + 1 (n = " + std::to_string(rows) +
                                    ", d = " + std::to_string(X.cols()) + ")");
  if (intercept_col && (*intercept_col < 0 || *intercept_col >= X.cols()))
    fail(ErrorKind::data_error, "intercept column out of range");
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < X.cols(); ++k)
      if (!std::isfinite(X(i, k)))
        fail(ErrorKind::data_error, "non-finite covariate at row " +
                                        std::to_string(i) + ", column " +
                                        std::to_string(k));
    if (T(i) < 0 || T(i) > J)
      fail(ErrorKind::data_error, "treatment level " + std::to_string(T(i)) +
                                      " at row " + std::to_string(i) +
                                      " outside 0.." + std::to_string(J));
    if (Y && !std::isfinite((*Y)(i)))
      fail(ErrorKind::data_error,
           "non-finite outcome at row " + std::to_string(i));
  }
  if (require_all_levels) {
    const auto counts = level_counts();
    for (int t = 0; t <= J; ++t)
      if (counts[t] == 0)
        fail(ErrorKind::data_error,
             "treatment level " + std::to_string(t) + " never observed");
  }
}

std::vector<Eigen::Index> Dataset::level_counts() const {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(J) + 1, 0);
  for (Eigen::Index i = 0; i < T.size(); ++i)
    if (T(i) >= 0 && T(i) <= J) ++counts[T(i)];
  return counts;
}

Eigen::MatrixXd Dataset::covariates_without_intercept() const {
  if (!intercept_col) return X;
  const int c = *intercept_col;
  Eigen::MatrixXd out(X.rows(), X.cols() - 1);
  out.leftCols(c) = X.leftCols(c);
  out.rightCols(X.cols() - c - 1) = X.rightCols(X.cols() - c - 1);
  return out;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.J = J;
  out.intercept_col = intercept_col;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.X.resize(m, X.cols());
  out.T.resize(m);
  if (Y) out.Y = Eigen::VectorXd(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    out.X.row(k) = X.row(rows[k]);
    out.T(k) = T(rows[k]);
    if (Y) (*out.Y)(k) = (*Y)(rows[k]);
  }
  return out;
}

}  // namespace dpcvm
