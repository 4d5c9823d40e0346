#include "dpcvm/estimation.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include <boost/math/distributions/normal.hpp>

#include "dpcvm/error.hpp"
#include "dpcvm/links.hpp"

namespace dpcvm {
namespace {

enum class Need { value, gradient, hessian };

struct Eval {
  double ll = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// log Lambda(z) without cancellation.
double log_logistic(double z) {
  z = links::clamp_index(z);
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// X' diag(w) X
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd WX = X.array().colwise() * w.array();
  Eigen::MatrixXd out(X.cols(), X.cols());
  out.noalias() = X.transpose() * WX;
  return out;
}

Eval eval_binary(Family family, const Eigen::VectorXd& theta, const Dataset& data,
                 Need need) {
  const Eigen::MatrixXd& X = data.X;
  const Eigen::VectorXd eta = X * theta;
  const Eigen::Index n = X.rows();
  Eval ev;
  Eigen::VectorXd m(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = family == Family::binary_probit ? links::clamp_probit_index(eta(i))
                                                     : links::clamp_index(eta(i));
    const double s = data.T(i) == 1 ? 1.0 : -1.0;
    if (family == Family::binary_logit) {
      ev.ll += log_logistic(s * z);
      const double p = links::logistic(z);
      m(i) = (data.T(i) == 1 ? 1.0 : 0.0) - p;
      w(i) = -p * (1.0 - p);
    } else {
      const double cdf = links::normal_cdf(s * z);
      ev.ll += std::log(cdf);
      // Generalized residual s * phi(z) / Phi(s z); d/dz = -m (z + m).
      const double mi = s * links::normal_pdf(z) / cdf;
      m(i) = mi;
      w(i) = -mi * (z + mi);
    }
  }
  if (need != Need::value) ev.grad = X.transpose() * m;
  if (need == Need::hessian) ev.hess = weighted_gram(X, w);
  return ev;
}

Eval eval_multinomial(const Eigen::VectorXd& theta, const Dataset& data,
                      Need need) {
  const Eigen::MatrixXd& X = data.X;
  const Eigen::Index n = X.rows(), d = X.cols();
  const int J = data.J;
  const Eigen::Map<const Eigen::MatrixXd> B(theta.data(), d, J);
  Eigen::MatrixXd eta = X * B;  // n x J
  Eigen::MatrixXd P(n, J);      // probabilities of levels 1..J
  Eval ev;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = 0.0;
    for (int s = 0; s < J; ++s) {
      eta(i, s) = links::clamp_index(eta(i, s));
      mx = std::max(mx, eta(i, s));
    }
    double total = std::exp(-mx);
    for (int s = 0; s < J; ++s) total += std::exp(eta(i, s) - mx);
    const double lse = mx + std::log(total);
    for (int s = 0; s < J; ++s) P(i, s) = std::exp(eta(i, s) - lse);
    const int t = data.T(i);
    ev.ll += (t == 0 ? 0.0 : eta(i, t - 1)) - lse;
  }
  if (need == Need::value) return ev;
  ev.grad.resize(J * d);
  for (int s = 0; s < J; ++s) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i)
      r(i) = (data.T(i) == s + 1 ? 1.0 : 0.0) - P(i, s);
    ev.grad.segment(s * d, d) = X.transpose() * r;
  }
  if (need == Need::hessian) {
    ev.hess.resize(J * d, J * d);
    for (int s = 0; s < J; ++s)
      for (int u = s; u < J; ++u) {
        Eigen::VectorXd w =
            -(P.col(s).array() * ((s == u ? 1.0 : 0.0) - P.col(u).array()))
                 .matrix();
        const Eigen::MatrixXd blk = weighted_gram(X, w);
        ev.hess.block(s * d, u * d, d, d) = blk;
        if (u != s) ev.hess.block(u * d, s * d, d, d) = blk.transpose();
      }
  }
  return ev;
}

Eval eval_ordered(const Eigen::VectorXd& theta, const Dataset& data, Need need) {
  const Eigen::MatrixXd& X = data.X;
  const Eigen::Index n = X.rows(), d = X.cols();
  const int J = data.J;
  const Eigen::VectorXd eta = X * theta.tail(d);
  Eval ev;
  const bool want_grad = need != Need::value;
  const bool want_hess = need == Need::hessian;
  Eigen::VectorXd ga_all, slope_w, hdd_w;
  Eigen::MatrixXd cross;  // n x J coefficients of x in the alpha-delta block
  Eigen::MatrixXd haa;
  if (want_grad) {
    ev.grad = Eigen::VectorXd::Zero(J + d);
    slope_w.resize(n);
  }
  if (want_hess) {
    hdd_w.resize(n);
    cross = Eigen::MatrixXd::Zero(n, J);
    haa = Eigen::MatrixXd::Zero(J, J);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = data.T(i);
    const bool upper = t < J, lower = t > 0;
    const double a = upper ? theta(t) - eta(i) : 0.0;
    const double b = lower ? theta(t - 1) - eta(i) : 0.0;
    double p;
    if (!lower)
      p = links::logistic(a);
    else if (!upper)
      p = links::logistic(-b);
    else if (links::logistic(b) > 0.5)
      p = links::logistic(-b) - links::logistic(-a);
    else
      p = links::logistic(a) - links::logistic(b);
    ev.ll += std::log(p);
    if (!want_grad) continue;
    const double ga = upper ? links::logistic_density(a) : 0.0;
    const double gb = lower ? links::logistic_density(b) : 0.0;
    if (upper) ev.grad(t) += ga / p;
    if (lower) ev.grad(t - 1) -= gb / p;
    slope_w(i) = -(ga - gb) / p;
    if (!want_hess) continue;
    const double ha = upper ? links::logistic_density_slope(a) : 0.0;
    const double hb = lower ? links::logistic_density_slope(b) : 0.0;
    const double p2 = p * p;
    if (upper) {
      haa(t, t) += ha / p - ga * ga / p2;
      cross(i, t) += -ha / p + ga * (ga - gb) / p2;
    }
    if (lower) {
      haa(t - 1, t - 1) += -hb / p - gb * gb / p2;
      cross(i, t - 1) += hb / p - gb * (ga - gb) / p2;
    }
    if (upper && lower) {
      haa(t, t - 1) += ga * gb / p2;
      haa(t - 1, t) += ga * gb / p2;
    }
    hdd_w(i) = (ha - hb) / p - (ga - gb) * (ga - gb) / p2;
  }
  if (want_grad) ev.grad.tail(d) = X.transpose() * slope_w;
  if (want_hess) {
    ev.hess.resize(J + d, J + d);
    ev.hess.topLeftCorner(J, J) = haa;
    const Eigen::MatrixXd ad = cross.transpose() * X;  // J x d
    ev.hess.topRightCorner(J, d) = ad;
    ev.hess.bottomLeftCorner(d, J) = ad.transpose();
    ev.hess.bottomRightCorner(d, d) = weighted_gram(X, hdd_w);
  }
  return ev;
}

Eval evaluate(Family family, const Eigen::VectorXd& theta, const Dataset& data,
              Need need) {
  switch (family) {
    case Family::binary_logit:
    case Family::binary_probit: return eval_binary(family, theta, data, need);
    case Family::multinomial_logit: return eval_multinomial(theta, data, need);
    case Family::ordered_logit: return eval_ordered(theta, data, need);
  }
  return {};
}

// Ordered cutpoints are optimized as (alpha_0, log(alpha_1 - alpha_0), ...)
// so that every Newton iterate is a valid model.
class Working {
 public:
  Working(Family family, int J) : ordered_(family == Family::ordered_logit), J_(J) {}

  Eigen::VectorXd to_working(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd u = theta;
    if (ordered_)
      for (int m = 1; m < J_; ++m) u(m) = std::log(theta(m) - theta(m - 1));
    return u;
  }

  Eigen::VectorXd to_natural(const Eigen::VectorXd& u) const {
    Eigen::VectorXd theta = u;
    if (ordered_)
      for (int m = 1; m < J_; ++m) theta(m) = theta(m - 1) + std::exp(u(m));
    return theta;
  }

  // Maps natural gradient/Hessian to working coordinates in place.
  void pull_back(const Eigen::VectorXd& u, Eval& ev, bool with_hessian) const {
    if (!ordered_ || J_ < 2) return;
    const Eigen::Index q = u.size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(q, q);
    // alpha_k = u_0 + sum_{m=1..k} exp(u_m)
    for (int k = 1; k < J_; ++k) {
      jac(k, 0) = 1.0;
      for (int m = 1; m <= k; ++m) jac(k, m) = std::exp(u(m));
    }
    const Eigen::VectorXd g_nat = ev.grad;
    ev.grad = jac.transpose() * g_nat;
    if (!with_hessian) return;
    Eigen::MatrixXd h = jac.transpose() * ev.hess * jac;
    for (int m = 1; m < J_; ++m) {
      double tail = 0.0;
      for (int k = m; k < J_; ++k) tail += g_nat(k);
      h(m, m) += std::exp(u(m)) * tail;
    }
    ev.hess = h;
  }

 private:
  bool ordered_;
  int J_;
};

void check_identifiable(Family family, const Dataset& data) {
  Eigen::MatrixXd design = data.X;
  if (family == Family::ordered_logit) {
    design.resize(data.n(), data.d() + 1);
    design.col(0).setOnes();
    design.rightCols(data.d()) = data.X;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    fail(ErrorKind::singular_hessian,
         "design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
             " of " + std::to_string(design.cols()) +
             " columns); the likelihood has no unique maximizer");
}

double observed_prob_max(Family family, const Eigen::VectorXd& theta,
                         const Dataset& data) {
  const PropensityModel model(family, data.J, data.d(), theta);
  const Eigen::MatrixXd P = model.prob_matrix(data.X);
  double mx = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) mx = std::max(mx, P(i, data.T(i)));
  return mx;
}

// True when some observation's linear index sits at the clamp, where the
// likelihood is flat and a vanishing gradient says nothing about an optimum.
bool index_at_bound(Family family, const Eigen::VectorXd& theta, const Dataset& data) {
  const Eigen::MatrixXd& X = data.X;
  switch (family) {
    case Family::binary_logit:
      return (X * theta).cwiseAbs().maxCoeff() >= links::index_bound;
    case Family::binary_probit:
      return (X * theta).cwiseAbs().maxCoeff() >= links::probit_index_bound;
    case Family::multinomial_logit: {
      const Eigen::Map<const Eigen::MatrixXd> B(theta.data(), X.cols(), data.J);
      return (X * B).cwiseAbs().maxCoeff() >= links::index_bound;
    }
    case Family::ordered_logit: {
      const Eigen::VectorXd eta = X * theta.tail(X.cols());
      for (int t = 0; t < data.J; ++t)
        if ((theta(t) - eta.array()).abs().maxCoeff() >= links::index_bound) return true;
      return false;
    }
  }
  return false;
}

}  // namespace

double loglik(Family family, const Eigen::VectorXd& theta, const Dataset& data) {
  if (theta.size() != PropensityModel::param_count(family, data.J, data.d()))
    fail(ErrorKind::dimension_mismatch, "theta length does not match the design");
  return evaluate(family, theta, data, Need::value).ll;
}

Eigen::VectorXd loglik_gradient(Family family, const Eigen::VectorXd& theta,
                                const Dataset& data) {
  if (theta.size() != PropensityModel::param_count(family, data.J, data.d()))
    fail(ErrorKind::dimension_mismatch, "theta length does not match the design");
  return evaluate(family, theta, data, Need::gradient).grad;
}

Eigen::MatrixXd loglik_hessian(Family family, const Eigen::VectorXd& theta,
                               const Dataset& data) {
  if (theta.size() != PropensityModel::param_count(family, data.J, data.d()))
    fail(ErrorKind::dimension_mismatch, "theta length does not match the design");
  return evaluate(family, theta, data, Need::hessian).hess;
}

Eigen::VectorXd default_init(Family family, const Dataset& data) {
  const Eigen::Index d = data.d();
  const int J = data.J;
  Eigen::VectorXd theta =
      Eigen::VectorXd::Zero(PropensityModel::param_count(family, J, d));
  const auto counts = data.level_counts();
  const double n = static_cast<double>(data.n());
  auto freq = [&](int t) {
    // Keep initial values finite when a level is missing.
    return std::max(static_cast<double>(counts[t]), 0.5) / n;
  };
  switch (family) {
    case Family::binary_logit:
      if (data.intercept_col) {
        const double p = std::clamp(freq(1), 1e-6, 1.0 - 1e-6);
        theta(*data.intercept_col) = std::log(p / (1.0 - p));
      }
      break;
    case Family::binary_probit:
      if (data.intercept_col) {
        const double p = std::clamp(freq(1), 1e-6, 1.0 - 1e-6);
        theta(*data.intercept_col) =
            boost::math::quantile(boost::math::normal_distribution<>(), p);
      }
      break;
    case Family::multinomial_logit:
      if (data.intercept_col)
        for (int s = 1; s <= J; ++s)
          theta((s - 1) * d + *data.intercept_col) = std::log(freq(s) / freq(0));
      break;
    case Family::ordered_logit: {
      double cum = 0.0;
      for (int t = 0; t < J; ++t) {
        cum += freq(t);
        const double c = std::clamp(cum, 1e-6, 1.0 - 1e-6);
        theta(t) = std::log(c / (1.0 - c));
        if (t > 0 && theta(t) <= theta(t - 1)) theta(t) = theta(t - 1) + 1e-3;
      }
      break;
    }
  }
  return theta;
}

FitResult fit_mle(Family family, const Dataset& data,
                  const std::optional<Eigen::VectorXd>& init,
                  const FitOptions& options) {
  data.validate(true);
  if ((family == Family::binary_logit || family == Family::binary_probit) &&
      data.J != 1)
    fail(ErrorKind::data_error, "binary family needs a 0/1 treatment");
  check_identifiable(family, data);

  Eigen::VectorXd theta0 = init ? *init : default_init(family, data);
  // Validates layout, finiteness and cutpoint order.
  (void)PropensityModel(family, data.J, data.d(), theta0);

  const Working working(family, data.J);
  Eigen::VectorXd u = working.to_working(theta0);
  auto eval_at = [&](const Eigen::VectorXd& uu, Need need) {
    Eval ev = evaluate(family, working.to_natural(uu), data, need);
    if (need != Need::value) {
      const Eigen::VectorXd g_nat = ev.grad;
      working.pull_back(uu, ev, need == Need::hessian);
      return std::pair{ev, g_nat};
    }
    return std::pair{ev, Eigen::VectorXd()};
  };

  FitResult res;
  res.family = family;
  res.J = data.J;
  auto [ev, g_nat] = eval_at(u, Need::hessian);
  if (!std::isfinite(ev.ll))
    fail(ErrorKind::invalid_argument, "log-likelihood not finite at the initial value");
  res.trace.push_back(ev.ll);

  int iter = 0;
  bool converged = g_nat.lpNorm<Eigen::Infinity>() <= options.tol;
  while (!converged && iter < options.max_iter) {
    ++iter;
    const Eigen::Index q = u.size();
    Eigen::VectorXd dir;
    Eigen::LLT<Eigen::MatrixXd> llt(-ev.hess);
    if (llt.info() == Eigen::Success) dir = llt.solve(ev.grad);
    double slope = dir.size() == q ? ev.grad.dot(dir) : -1.0;
    if (!(slope > 0.0) || !dir.allFinite()) {
      dir = ev.grad;
      slope = ev.grad.squaredNorm();
    }

    bool accepted = false;
    double step = 1.0;
    Eigen::VectorXd u_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      u_new = u + step * dir;
      ll_new = eval_at(u_new, Need::value).first.ll;
      if (std::isfinite(ll_new) && ll_new >= ev.ll + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the Armijo gain is below the rounding level of ll;
      // accept a full step that does not lose and shrinks the gradient.
      if (halving == 0 && std::isfinite(ll_new) &&
          ll_new >= ev.ll - 1e-12 * (1.0 + std::abs(ev.ll))) {
        auto [probe, probe_g] = eval_at(u_new, Need::gradient);
        if (probe_g.lpNorm<Eigen::Infinity>() < g_nat.lpNorm<Eigen::Infinity>()) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    u = u_new;
    std::tie(ev, g_nat) = eval_at(u, Need::hessian);
    res.trace.push_back(ev.ll);
    converged = g_nat.lpNorm<Eigen::Infinity>() <= options.tol;
  }

  res.theta_hat = working.to_natural(u);
  res.loglik = ev.ll;
  res.gradient_norm = g_nat.lpNorm<Eigen::Infinity>();
  res.iterations = iter;
  res.converged = converged;

  if (!converged) {
    if (observed_prob_max(family, res.theta_hat, data) > 1.0 - 1e-10)
      fail(ErrorKind::separation_detected,
           "fitted probabilities reach 0/1 for observed levels while the "
           "gradient does not vanish (sup-norm " +
               std::to_string(res.gradient_norm) + ")");
    fail(ErrorKind::not_converged,
         "no convergence after " + std::to_string(iter) +
             " iterations (gradient sup-norm " + std::to_string(res.gradient_norm) +
             ")");
  }

  if (index_at_bound(family, res.theta_hat, data))
    fail(ErrorKind::separation_detected,
         "fitted linear index reaches the clamp bound; the data look separated");

  const Eigen::MatrixXd h_nat = loglik_hessian(family, res.theta_hat, data);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(-h_nat);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    fail(ErrorKind::singular_hessian, "Hessian is not negative definite at the optimum");
  res.covariance_proxy =
      ldlt.solve(Eigen::MatrixXd::Identity(h_nat.rows(), h_nat.cols()));
  return res;
}

}  // namespace dpcvm
