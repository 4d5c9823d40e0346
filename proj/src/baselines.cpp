#include "dpcvm/baselines.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dpcvm/error.hpp"
#include "dpcvm/simd/kernels.hpp"

namespace dpcvm {
namespace {

void check_variant(SsVariant variant, Family family) {
  const bool ok = [&] {
    switch (variant) {
      case SsVariant::binary:
        return family == Family::binary_logit || family == Family::binary_probit;
      case SsVariant::multinomial_joint:
      case SsVariant::multinomial_marginal:
        return family == Family::multinomial_logit;
      case SsVariant::ordered:
        return family == Family::ordered_logit;
    }
    return false;
  }();
  if (!ok)
    fail(ErrorKind::invalid_argument, "ss variant " + std::string(to_string(variant)) +
                                          " does not apply to family " +
                                          std::string(to_string(family)));
}

struct SsLevels {
  ProjectedResiduals pr;
  std::vector<Eigen::MatrixXd> kernels;
};

SsLevels build_levels(const PropensityModel& model, const Dataset& data,
                      const SsTestSpec& spec) {
  check_variant(spec.variant, model.family());
  const LevelSet levels =
      spec.levels.value_or(LevelSet::defaults(model.family(), model.J()));
  SsLevels out;
  out.pr = projected_residuals(model, data, levels);
  if (spec.variant == SsVariant::multinomial_joint) {
    // The evaluation points do not depend on t.
    const Eigen::MatrixXd K =
        dominance_kernel(ss_evaluation_points(model, data, spec.variant, 1));
    out.kernels.assign(levels.levels.size(), K);
  } else {
    for (int t : levels.levels)
      out.kernels.push_back(
          dominance_kernel(ss_evaluation_points(model, data, spec.variant, t)));
  }
  return out;
}

double quadratic_sum(const SsLevels& s) {
  const double n2 = static_cast<double>(s.pr.n) * static_cast<double>(s.pr.n);
  double total = 0.0;
  for (std::size_t k = 0; k < s.pr.levels.size(); ++k) {
    const auto& lv = s.pr.levels[k];
    if (lv.weight() == 0.0) continue;
    total += lv.weight() * lv.e_pro().dot(s.kernels[k] * lv.e_pro()) / n2;
  }
  return std::max(total, 0.0);
}

}  // namespace

std::string_view statistic_name(SsVariant variant) {
  switch (variant) {
    case SsVariant::binary: return "ss";
    case SsVariant::multinomial_joint: return "ss1m";
    case SsVariant::multinomial_marginal: return "ss2m";
    case SsVariant::ordered: return "sso";
  }
  return "ss";
}

std::string_view to_string(SsVariant variant) {
  switch (variant) {
    case SsVariant::binary: return "binary";
    case SsVariant::multinomial_joint: return "multinomial_joint";
    case SsVariant::multinomial_marginal: return "multinomial_marginal";
    case SsVariant::ordered: return "ordered";
  }
  return "binary";
}

SsVariant parse_ss_variant(std::string_view name) {
  for (auto v : {SsVariant::binary, SsVariant::multinomial_joint,
                 SsVariant::multinomial_marginal, SsVariant::ordered})
    if (name == to_string(v)) return v;
  fail(ErrorKind::invalid_argument, "unknown ss variant '" + std::string(name) + "'");
}

SsVariant default_ss_variant(Family family) {
  switch (family) {
    case Family::binary_logit:
    case Family::binary_probit: return SsVariant::binary;
    case Family::multinomial_logit: return SsVariant::multinomial_marginal;
    case Family::ordered_logit: return SsVariant::ordered;
  }
  return SsVariant::binary;
}

Eigen::MatrixXd ss_evaluation_points(const PropensityModel& model, const Dataset& data,
                                     SsVariant variant, int t) {
  check_variant(variant, model.family());
  const Eigen::Index n = data.n();
  switch (variant) {
    case SsVariant::binary:
      return model.prob_matrix(data.X).col(1);
    case SsVariant::multinomial_joint:
      return model.prob_matrix(data.X).rightCols(model.J());
    case SsVariant::multinomial_marginal:
      if (t < 0 || t > model.J())
        fail(ErrorKind::invalid_argument, "level " + std::to_string(t) + " out of range");
      return model.prob_matrix(data.X).col(t);
    case SsVariant::ordered: {
      if (t < 0 || t >= model.J())
        fail(ErrorKind::invalid_argument,
             "cumulative level " + std::to_string(t) + " out of range");
      Eigen::MatrixXd U(n, 1);
      for (Eigen::Index i = 0; i < n; ++i) U(i, 0) = model.cumulative(data.X.row(i))[t];
      return U;
    }
  }
  return {};
}

Eigen::MatrixXd dominance_kernel(const Eigen::MatrixXd& U) {
  const Eigen::Index n = U.rows();
  if (n < 1 || U.cols() < 1) fail(ErrorKind::invalid_argument, "empty evaluation points");
  if (!U.allFinite()) fail(ErrorKind::data_error, "non-finite evaluation points");
  Eigen::MatrixXd K(n, n);

  if (U.cols() == 1) {
    // c_j = #{k : U_k >= U_j}, counted from a sort.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return U(a, 0) < U(b, 0); });
    Eigen::VectorXd c(n);
    std::size_t pos = 0;
    while (pos < order.size()) {
      std::size_t end = pos;
      while (end < order.size() && U(order[end], 0) == U(order[pos], 0)) ++end;
      for (std::size_t m = pos; m < end; ++m)
        c[order[m]] = static_cast<double>(order.size() - pos);
      pos = end;
    }
    for (Eigen::Index l = 0; l < n; ++l)
      for (Eigen::Index j = 0; j < n; ++j) K(j, l) = std::min(c[j], c[l]);
    return K;
  }

  // bits_j has bit k set when U_j <= U_k componentwise.
  const auto un = static_cast<std::size_t>(n);
  const std::size_t words = (un + 63) / 64;
  std::vector<std::uint64_t> bits(un * words, 0);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      if ((U.row(j).array() <= U.row(k).array()).all())
        bits[j * words + k / 64] |= std::uint64_t{1} << (k % 64);
  const simd::Backend backend = simd::best_backend();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index l = j; l < n; ++l) {
      const double v = static_cast<double>(
          simd::and_popcount(backend, &bits[j * words], &bits[l * words], words));
      K(j, l) = K(l, j) = v;
    }
  return K;
}

double ss_statistic(const PropensityModel& model, const Dataset& data,
                    const SsTestSpec& spec) {
  return quadratic_sum(build_levels(model, data, spec));
}

TestResult ss_bootstrap(const PropensityModel& model, const Dataset& data,
                        const SsTestSpec& spec) {
  const SsLevels s = build_levels(model, data, spec);
  std::vector<QuadraticLevel> levels;
  for (std::size_t k = 0; k < s.pr.levels.size(); ++k)
    levels.push_back({&s.pr.levels[k], &s.kernels[k]});
  BootstrapOptions opt;
  opt.B = spec.B;
  opt.seed = spec.seed;
  opt.law = spec.law;
  opt.threads = spec.threads;
  TestResult res = bootstrap_quadratic(levels, quadratic_sum(s), opt);
  res.statistic_name = std::string(statistic_name(spec.variant));
  return res;
}

}  // namespace dpcvm
