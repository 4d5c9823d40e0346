#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpcvm/dataset.hpp"
#include "dpcvm/models.hpp"

namespace dpcvm {

struct FitOptions {
  double tol = 1e-8;  // sup-norm of the log-likelihood gradient
  int max_iter = 100;
};

struct FitResult {
  Family family = Family::binary_logit;
  int J = 1;
  Eigen::VectorXd theta_hat;
  double loglik = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // Inverse of the negative Hessian at theta_hat; diagnostics only.
  Eigen::MatrixXd covariance_proxy;
  // Log-likelihood after each accepted step, starting with the initial value.
  std::vector<double> trace;

  PropensityModel model(Eigen::Index d) const {
    return PropensityModel(family, J, d, theta_hat);
  }
};

// Sum_i log q_{T_i}(X_i, theta). Non-finite on invalid parameters.
double loglik(Family family, const Eigen::VectorXd& theta, const Dataset& data);

// Analytic gradient of loglik with respect to theta.
Eigen::VectorXd loglik_gradient(Family family, const Eigen::VectorXd& theta,
                                const Dataset& data);

// Analytic Hessian of loglik with respect to theta.
Eigen::MatrixXd loglik_hessian(Family family, const Eigen::VectorXd& theta,
                               const Dataset& data);

// Zero slopes; intercepts (or cutpoints) matched to the marginal treatment
// frequencies when the design has an intercept column (always for ordered).
Eigen::VectorXd default_init(Family family, const Dataset& data);

// Maximum likelihood by damped Newton (Armijo backtracking, gradient
// fallback when the Hessian is not negative definite).
//
// Throws separation_detected, singular_hessian or not_converged.
FitResult fit_mle(Family family, const Dataset& data,
                  const std::optional<Eigen::VectorXd>& init = std::nullopt,
                  const FitOptions& options = {});

}  // namespace dpcvm
