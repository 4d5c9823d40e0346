#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "dpcvm/dataset.hpp"
#include "dpcvm/geometry.hpp"
#include "dpcvm/models.hpp"
#include "dpcvm/rng.hpp"

namespace dpcvm::testing {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Stream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, Stream& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// Random parameter vector valid for the family (increasing cutpoints).
inline Eigen::VectorXd random_theta(Family family, int J, Eigen::Index d, Stream& rng,
                                    double scale = 0.5) {
  const Eigen::Index q = PropensityModel::param_count(family, J, d);
  Eigen::VectorXd theta = gaussian_vector(q, rng, scale);
  if (family == Family::ordered_logit) {
    theta[0] = -0.5 + 0.3 * rng.normal();
    for (int k = 1; k < J; ++k) theta[k] = theta[k - 1] + 0.5 + rng.uniform();
  }
  return theta;
}

inline int levels_for(Family family) {
  return family == Family::binary_logit || family == Family::binary_probit ? 1 : 2;
}

// Data drawn from the model itself; unordered designs carry an intercept in
// column 0, ordered designs have none.
inline Dataset model_dataset(Family family, Eigen::Index n, Eigen::Index n_cov, int J,
                             const Eigen::VectorXd& theta, Stream& rng) {
  const bool intercept = family != Family::ordered_logit;
  const Eigen::Index d = n_cov + (intercept ? 1 : 0);
  Dataset data;
  data.J = J;
  data.X.resize(n, d);
  data.T.resize(n);
  if (intercept) data.intercept_col = 0;
  const PropensityModel model(family, J, d, theta);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (intercept) data.X(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < n_cov; ++k) data.X(i, k + (intercept ? 1 : 0)) = rng.normal();
    const Eigen::VectorXd p = model.prob(data.X.row(i));
    double u = rng.uniform(), acc = 0.0;
    int t = J;
    for (int l = 0; l <= J; ++l) {
      acc += p[l];
      if (u < acc) {
        t = l;
        break;
      }
    }
    data.T[i] = t;
  }
  return data;
}

// Redraws until every level appears.
inline Dataset full_model_dataset(Family family, Eigen::Index n, Eigen::Index n_cov, int J,
                                  const Eigen::VectorXd& theta, Stream& rng) {
  for (;;) {
    Dataset d = model_dataset(family, n, n_cov, J, theta, rng);
    bool all = true;
    for (auto c : d.level_counts()) all = all && c > 0;
    if (all) return d;
  }
}

// Independent reference for one kernel term: the angle at x_r between
// x_i - x_r and x_j - x_r from the half-angle atan2 form in long double,
// with the duplicate conventions, times the sphere factor.
inline double oracle_aijr(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                          const Eigen::VectorXd& xr, double dup_tol = 1e-12) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const Eigen::Index d = xi.size();
  long double nu = 0, nv = 0, nij = 0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const long double u = static_cast<long double>(xi[k]) - xr[k];
    const long double v = static_cast<long double>(xj[k]) - xr[k];
    const long double w = static_cast<long double>(xi[k]) - xj[k];
    nu += u * u;
    nv += v * v;
    nij += w * w;
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  nij = std::sqrt(nij);
  const bool ir = nu <= dup_tol, jr = nv <= dup_tol, ij = nij <= dup_tol;
  long double angle;
  if (ir && jr) {
    angle = 2 * pi;
  } else if (ir || jr || ij) {
    angle = pi;
  } else {
    long double minus = 0, plus = 0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const long double a = (static_cast<long double>(xi[k]) - xr[k]) * nv;
      const long double b = (static_cast<long double>(xj[k]) - xr[k]) * nu;
      minus += (a - b) * (a - b);
      plus += (a + b) * (a + b);
    }
    angle = pi - 2 * std::atan2(std::sqrt(minus), std::sqrt(plus));
  }
  return static_cast<double>(angle) * sphere_factor(static_cast<int>(d));
}

// Naive triple loop over the reference term.
inline Eigen::MatrixXd naive_an(const Eigen::MatrixXd& X, double dup_tol = 1e-12) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index r = 0; r < n; ++r)
        A(i, j) += oracle_aijr(X.row(i).transpose(), X.row(j).transpose(), X.row(r).transpose(),
                               dup_tol);
  return A;
}

// Monte Carlo estimate of the circle-scale solid angle: the share of
// uniform directions b with b'x_i <= b'x_r and b'x_j <= b'x_r, times 2 pi.
inline double mc_circle_angle(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                              const Eigen::VectorXd& xr, int draws, Stream& rng) {
  const Eigen::Index d = xi.size();
  const Eigen::VectorXd a = xi - xr, b = xj - xr;
  long hits = 0;
  Eigen::VectorXd beta(d);
  for (int k = 0; k < draws; ++k) {
    for (Eigen::Index c = 0; c < d; ++c) beta[c] = rng.normal();
    if (beta.dot(a) <= 0.0 && beta.dot(b) <= 0.0) ++hits;
  }
  return 2.0 * M_PI * static_cast<double>(hits) / draws;
}

}  // namespace dpcvm::testing
