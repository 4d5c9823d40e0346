#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dpcvm {

enum class Family { binary_logit, binary_probit, multinomial_logit, ordered_logit };

// level:      e(t) = 1(T = t)  - q_t(x)
// cumulative: e(t) = 1(T <= t) - P(T <= t | x)
enum class ResidualKind { level, cumulative };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

// A covariate row; binds to X.row(i) of a column-major matrix without a copy.
using RowView = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// Parametric generalized propensity score q_t(x, theta), t = 0..J.
//
// Parameter layout (d = covariate dimension):
//   binary_logit / binary_probit: theta in R^d, J = 1
//   multinomial_logit: J blocks of length d; block s-1 is level s, level 0
//     is the reference with all-zero parameters
//   ordered_logit: cutpoints alpha_0 < ... < alpha_{J-1}, then slopes delta;
//     P(T <= t | x) = Lambda(alpha_t - x'delta)
class PropensityModel {
 public:
  PropensityModel(Family family, int J, Eigen::Index d, Eigen::VectorXd theta);

  static Eigen::Index param_count(Family family, int J, Eigen::Index d);

  Family family() const { return family_; }
  int J() const { return J_; }
  Eigen::Index covariate_dim() const { return d_; }
  Eigen::Index num_params() const { return theta_.size(); }
  ResidualKind residual_kind() const {
    return family_ == Family::ordered_logit ? ResidualKind::cumulative
                                            : ResidualKind::level;
  }
  const Eigen::VectorXd& theta() const { return theta_; }

  // Levels t for which residual() and score() are defined: 0..J for level
  // residuals, 0..J-1 for cumulative ones.
  int residual_level_count() const {
    return residual_kind() == ResidualKind::level ? J_ + 1 : J_;
  }

  // (q_0, ..., q_J); entries in (0,1) summing to one.
  Eigen::VectorXd prob(RowView x) const;

  // P(T <= t | x) for t = 0..J-1.
  Eigen::VectorXd cumulative(RowView x) const;

  // Gradient with respect to theta of q_t (level kind) or of P(T <= t | x)
  // (cumulative kind).
  Eigen::VectorXd score(RowView x, int t) const;

  double residual(RowView x, int t_obs, int t) const;

  // Batched forms over the rows of X.
  Eigen::MatrixXd prob_matrix(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& X, int t) const;
  Eigen::VectorXd residual_vector(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXi& T, int t) const;

 private:
  void check_row(RowView x) const;
  void check_level(int t) const;
  void prob_into(RowView x, double* out) const;
  void score_into(RowView x, int t, double* out) const;

  Family family_;
  int J_;
  Eigen::Index d_;
  Eigen::VectorXd theta_;
};

// The treatment levels entering the statistic, with non-negative weights.
struct LevelSet {
  std::vector<int> levels;
  std::vector<double> weights;

  // binary: {1}; multinomial: {1..J}; ordered: cumulative {0..J-1}.
  // include_level0 adds level 0 for the unordered families.
  static LevelSet defaults(Family family, int J, bool include_level0 = false);

  void validate(const PropensityModel& model) const;
};

}  // namespace dpcvm
