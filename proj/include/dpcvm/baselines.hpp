#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "dpcvm/dataset.hpp"
#include "dpcvm/dptest.hpp"
#include "dpcvm/models.hpp"

namespace dpcvm {

// Single-projection Cramer-von Mises tests. Each level t uses
//   R_t(u) = n^{-1/2} sum_j e_j(t) P_{n,t} 1(U_j <= u),
//   CvM_t  = n^{-1} sum_k R_t(U_k)^2,
// with U_j the fitted propensity of observation j:
//   binary:               U_j = q_1(X_j)
//   multinomial_joint:    U_j = (q_1(X_j), ..., q_J(X_j)), componentwise <=
//   multinomial_marginal: U_j = q_t(X_j)
//   ordered:              U_j = P(T <= t | X_j)
// Removing the score projection from the indicator is the same as
// projecting the residuals, so CvM_t = n^{-2} e_pro' K e_pro with
// K_jl = #{k : U_j <= U_k and U_l <= U_k}.
enum class SsVariant { binary, multinomial_joint, multinomial_marginal, ordered };

std::string_view to_string(SsVariant variant);
SsVariant parse_ss_variant(std::string_view name);

// Short statistic label used in reports: ss, ss1m, ss2m, sso.
std::string_view statistic_name(SsVariant variant);

// binary -> binary, multinomial -> marginal, ordered -> ordered.
SsVariant default_ss_variant(Family family);

struct SsTestSpec {
  SsVariant variant = SsVariant::binary;
  std::optional<LevelSet> levels;
  int B = 999;
  std::uint64_t seed = 0;
  MultiplierLaw law = MultiplierLaw::mammen;
  int threads = 1;
};

// Evaluation points U (n x k) for level t.
Eigen::MatrixXd ss_evaluation_points(const PropensityModel& model, const Dataset& data,
                                     SsVariant variant, int t);

// K_jl = #{k : U_j <= U_k and U_l <= U_k}, ties included. One column uses
// K_jl = min(c_j, c_l), c_j = #{k : U_k >= U_j}; more columns use dominance
// bitsets and AND-popcounts.
Eigen::MatrixXd dominance_kernel(const Eigen::MatrixXd& U);

double ss_statistic(const PropensityModel& model, const Dataset& data,
                    const SsTestSpec& spec);

// Same multiplier scheme as the double-projection test, and the same draws for
// equal seeds: e* = V o e, re-projected with fixed scores and Delta, measured
// with fixed dominance kernels.
TestResult ss_bootstrap(const PropensityModel& model, const Dataset& data,
                        const SsTestSpec& spec);

}  // namespace dpcvm
