#include "dpcvm/models.hpp"

#include <cmath>

#include "dpcvm/error.hpp"
#include "dpcvm/links.hpp"

namespace dpcvm {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::binary_logit: return "logit";
    case Family::binary_probit: return "probit";
    case Family::multinomial_logit: return "mlogit";
    case Family::ordered_logit: return "ologit";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "logit" || name == "binary_logit") return Family::binary_logit;
  if (name == "probit" || name == "binary_probit") return Family::binary_probit;
  if (name == "mlogit" || name == "multinomial_logit")
    return Family::multinomial_logit;
  if (name == "ologit" || name == "ordered_logit") return Family::ordered_logit;
  fail(ErrorKind::invalid_argument,
       "unknown model family '" + std::string(name) + "'");
}

Eigen::Index PropensityModel::param_count(Family family, int J, Eigen::Index d) {
  switch (family) {
    case Family::binary_logit:
    case Family::binary_probit: return d;
    case Family::multinomial_logit: return J * d;
    case Family::ordered_logit: return J + d;
  }
  return 0;
}

PropensityModel::PropensityModel(Family family, int J, Eigen::Index d,
                                 Eigen::VectorXd theta)
    : family_(family), J_(J), d_(d), theta_(std::move(theta)) {
  if (J < 1) fail(ErrorKind::invalid_argument, "J must be at least 1");
  if ((family == Family::binary_logit || family == Family::binary_probit) &&
      J != 1)
    fail(ErrorKind::invalid_argument, "binary families require J = 1");
  if (d < 1 && family != Family::ordered_logit)
    fail(ErrorKind::invalid_argument, "covariate dimension must be positive");
  if (theta_.size() != param_count(family, J, d))
    fail(ErrorKind::dimension_mismatch,
         "theta has length " + std::to_string(theta_.size()) + ", expected " +
             std::to_string(param_count(family, J, d)));
  if (!theta_.allFinite())
    fail(ErrorKind::invalid_argument, "non-finite parameter");
  if (family == Family::ordered_logit)
    for (int t = 1; t < J; ++t)
      if (!(theta_(t) > theta_(t - 1)))
        fail(ErrorKind::invalid_argument, "cutpoints must be strictly increasing");
}

void PropensityModel::check_row(RowView x) const {
  if (x.size() != d_)
    fail(ErrorKind::dimension_mismatch,
         "covariate row has length " + std::to_string(x.size()) + ", model expects " +
             std::to_string(d_));
}

void PropensityModel::check_level(int t) const {
  if (t < 0 || t >= residual_level_count())
    fail(ErrorKind::invalid_argument, "level " + std::to_string(t) +
                                          " out of range for this model");
}

void PropensityModel::prob_into(RowView x, double* out) const {
  switch (family_) {
    case Family::binary_logit: {
      const double z = x.dot(theta_);
      out[1] = links::logistic(z);
      out[0] = links::logistic(-z);
      break;
    }
    case Family::binary_probit: {
      const double z = x.dot(theta_);
      out[1] = links::normal_cdf(z);
      out[0] = links::normal_cdf(-z);
      break;
    }
    case Family::multinomial_logit: {
      // Softmax over (0, eta_1, ..., eta_J) with max subtraction.
      double m = 0.0;
      for (int s = 1; s <= J_; ++s) {
        out[s] = links::clamp_index(x.dot(theta_.segment((s - 1) * d_, d_)));
        m = std::max(m, out[s]);
      }
      out[0] = std::exp(-m);
      double total = out[0];
      for (int s = 1; s <= J_; ++s) {
        out[s] = std::exp(out[s] - m);
        total += out[s];
      }
      for (int s = 0; s <= J_; ++s) out[s] /= total;
      break;
    }
    case Family::ordered_logit: {
      const double eta = x.dot(theta_.tail(d_));
      double prev = 0.0;
      for (int t = 0; t < J_; ++t) {
        const double a = theta_(t) - eta;
        // Upper tail by complement so that probabilities near 1 keep their
        // relative precision.
        double cur = links::logistic(a);
        out[t] = cur - prev;
        if (t > 0 && prev > 0.5) {
          const double b = theta_(t - 1) - eta;
          out[t] = links::logistic(-b) - links::logistic(-a);
        }
        prev = cur;
      }
      out[J_] = links::logistic(-(theta_(J_ - 1) - eta));
      break;
    }
  }
}

Eigen::VectorXd PropensityModel::prob(RowView x) const {
  check_row(x);
  Eigen::VectorXd out(J_ + 1);
  prob_into(x, out.data());
  return out;
}

Eigen::VectorXd PropensityModel::cumulative(RowView x) const {
  check_row(x);
  Eigen::VectorXd out(J_);
  if (family_ == Family::ordered_logit) {
    const double eta = x.dot(theta_.tail(d_));
    for (int t = 0; t < J_; ++t) out(t) = links::logistic(theta_(t) - eta);
    return out;
  }
  Eigen::VectorXd p(J_ + 1);
  prob_into(x, p.data());
  double acc = 0.0;
  for (int t = 0; t < J_; ++t) out(t) = (acc += p(t));
  return out;
}

void PropensityModel::score_into(RowView x, int t, double* out) const {
  Eigen::Map<Eigen::VectorXd> g(out, theta_.size());
  switch (family_) {
    case Family::binary_logit:
    case Family::binary_probit: {
      const double z = x.dot(theta_);
      const double dens = family_ == Family::binary_logit
                              ? links::logistic_density(z)
                              : links::normal_pdf(z);
      g = (t == 1 ? dens : -dens) * x.transpose();
      break;
    }
    case Family::multinomial_logit: {
      Eigen::VectorXd p(J_ + 1);
      prob_into(x, p.data());
      for (int s = 1; s <= J_; ++s) {
        const double c = p(t) * ((t == s ? 1.0 : 0.0) - p(s));
        g.segment((s - 1) * d_, d_) = c * x.transpose();
      }
      break;
    }
    case Family::ordered_logit: {
      const double eta = x.dot(theta_.tail(d_));
      const double lam = links::logistic_density(theta_(t) - eta);
      g.head(J_).setZero();
      g(t) = lam;
      g.tail(d_) = -lam * x.transpose();
      break;
    }
  }
}

Eigen::VectorXd PropensityModel::score(RowView x, int t) const {
  check_row(x);
  check_level(t);
  Eigen::VectorXd g(theta_.size());
  score_into(x, t, g.data());
  return g;
}

double PropensityModel::residual(RowView x, int t_obs, int t) const {
  check_row(x);
  check_level(t);
  if (residual_kind() == ResidualKind::cumulative) {
    const double eta = x.dot(theta_.tail(d_));
    return (t_obs <= t ? 1.0 : 0.0) - links::logistic(theta_(t) - eta);
  }
  Eigen::VectorXd p(J_ + 1);
  prob_into(x, p.data());
  return (t_obs == t ? 1.0 : 0.0) - p(t);
}

Eigen::MatrixXd PropensityModel::prob_matrix(const Eigen::MatrixXd& X) const {
  if (X.cols() != d_) fail(ErrorKind::dimension_mismatch, "X has wrong width");
  Eigen::MatrixXd out(X.rows(), J_ + 1);
  Eigen::VectorXd p(J_ + 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    prob_into(X.row(i), p.data());
    out.row(i) = p.transpose();
  }
  return out;
}

Eigen::MatrixXd PropensityModel::score_matrix(const Eigen::MatrixXd& X,
                                              int t) const {
  if (X.cols() != d_) fail(ErrorKind::dimension_mismatch, "X has wrong width");
  check_level(t);
  Eigen::MatrixXd out(X.rows(), theta_.size());
  Eigen::VectorXd g(theta_.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    score_into(X.row(i), t, g.data());
    out.row(i) = g.transpose();
  }
  return out;
}

Eigen::VectorXd PropensityModel::residual_vector(const Eigen::MatrixXd& X,
                                                 const Eigen::VectorXi& T,
                                                 int t) const {
  if (X.cols() != d_) fail(ErrorKind::dimension_mismatch, "X has wrong width");
  if (T.size() != X.rows())
    fail(ErrorKind::dimension_mismatch, "T and X row counts differ");
  check_level(t);
  Eigen::VectorXd e(X.rows());
  if (residual_kind() == ResidualKind::cumulative) {
    const Eigen::VectorXd eta = X * theta_.tail(d_);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      e(i) = (T(i) <= t ? 1.0 : 0.0) - links::logistic(theta_(t) - eta(i));
    return e;
  }
  Eigen::VectorXd p(J_ + 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    prob_into(X.row(i), p.data());
    e(i) = (T(i) == t ? 1.0 : 0.0) - p(t);
  }
  return e;
}

LevelSet LevelSet::defaults(Family family, int J, bool include_level0) {
  LevelSet ls;
  if (family == Family::ordered_logit) {
    for (int t = 0; t < J; ++t) ls.levels.push_back(t);
  } else {
    for (int t = include_level0 ? 0 : 1; t <= J; ++t) ls.levels.push_back(t);
  }
  ls.weights.assign(ls.levels.size(), 1.0);
  return ls;
}

void LevelSet::validate(const PropensityModel& model) const {
  if (levels.empty()) fail(ErrorKind::invalid_argument, "level set is empty");
  if (weights.size() != levels.size())
    fail(ErrorKind::invalid_argument, "one weight per level required");
  double total = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 0 || levels[k] >= model.residual_level_count())
      fail(ErrorKind::invalid_argument,
           "level " + std::to_string(levels[k]) + " not valid for this model");
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k]))
      fail(ErrorKind::invalid_argument, "level weights must be non-negative");
    total += weights[k];
  }
  if (!(total > 0.0))
    fail(ErrorKind::invalid_argument, "level weights must have positive sum");
}

}  // namespace dpcvm
