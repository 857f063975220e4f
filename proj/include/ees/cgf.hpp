#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "ees/errors.hpp"
#include "ees/math.hpp"

namespace ees {

//! m x d matrix of simulated summary-statistic vectors, one vector per row.
using StatMatrix = Eigen::MatrixXd;

//! Value, gradient and Hessian of a cumulant generating function at a point.
struct CgfEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

//! Empirical CGF of the sample rows and its exact derivatives.
//!
//! K(lambda) = log mean_i exp(lambda' s_i), evaluated with a max-shift so no
//! intermediate exponential overflows however large lambda' s_i gets. The
//! Hessian is accumulated in centered form, which keeps it positive
//! semidefinite even when the softmax weights degenerate onto a few rows.
inline CgfEval empirical_cgf(const StatMatrix& samples, const Eigen::VectorXd& lambda)
{
  if (!lambda.allFinite())
    throw invalid_input_error("empirical_cgf: non-finite lambda");
  if (samples.rows() < 1 || samples.cols() != lambda.size())
    throw invalid_input_error("empirical_cgf: sample/lambda dimension mismatch");

  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();

  Eigen::ArrayXd t = (samples * lambda).array();
  const double tmax = t.maxCoeff();
  Eigen::ArrayXd w = (t - tmax).exp();
  const double wsum = w.sum();

  CgfEval out;
  out.value = tmax + std::log(wsum / static_cast<double>(m));
  w /= wsum;
  out.grad = samples.transpose() * w.matrix();

  Eigen::MatrixXd centered = samples.rowwise() - out.grad.transpose();
  centered.array().colwise() *= w.sqrt();
  out.hess = Eigen::MatrixXd::Zero(d, d);
  out.hess.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  out.hess.triangularView<Eigen::StrictlyUpper>() = out.hess.transpose();
  return out;
}

//! CGF of a normal with moments (mu, sigma):
//! value lambda'mu + lambda'sigma lambda / 2, gradient mu + sigma lambda,
//! Hessian sigma. sigma must be positive definite.
inline CgfEval gaussian_cgf(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                            const Eigen::VectorXd& lambda)
{
  if (!lambda.allFinite())
    throw invalid_input_error("gaussian_cgf: non-finite lambda");
  if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size() || mu.size() != lambda.size())
    throw invalid_input_error("gaussian_cgf: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw factorization_error("gaussian_cgf: sigma not positive definite");

  CgfEval out;
  const Eigen::VectorXd sl = sigma.selfadjointView<Eigen::Lower>() * lambda;
  out.value = lambda.dot(mu) + 0.5 * lambda.dot(sl);
  out.grad = mu + sl;
  out.hess = sigma;
  return out;
}

//! log of the empirical/Gaussian mixture weight as a function of the squared
//! Mahalanobis radius r of the query from the sample mean:
//!
//!   log g = gamma * ( log(r (1 + r/2) + 1) - r )
//!
//! The base is 1 at r = 0 and decays like e^-r, so g maps into [0, 1], is 1
//! at the mean or for gamma = 0, and vanishes as the query leaves the bulk
//! of the simulated cloud. gamma = +inf selects the pure Gaussian branch.
inline double log_mixture_weight_from_radius(double r, double gamma)
{
  if (gamma < 0.0 || std::isnan(gamma))
    throw invalid_input_error("mixture weight: gamma must be nonnegative");
  if (r < 0.0 || std::isnan(r))
    throw invalid_input_error("mixture weight: negative squared radius");
  if (std::isinf(gamma))
    return -std::numeric_limits<double>::infinity();
  // log1p(r + r^2/2) stays accurate for small r where base ~ 1 - r^3/6.
  const double log_base = std::log1p(r * (1.0 + 0.5 * r)) - r;
  return gamma * log_base;
}

//! Mixture weight g(s, gamma) given query, sample moments and gamma.
inline double mixture_weight(const Eigen::VectorXd& s, const Eigen::VectorXd& mu_hat,
                             const Eigen::MatrixXd& sigma_hat, double gamma)
{
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_hat);
  if (llt.info() != Eigen::Success)
    throw factorization_error("mixture_weight: sigma_hat not positive definite");
  const double r = llt.matrixL().solve(s - mu_hat).squaredNorm();
  const double lg = log_mixture_weight_from_radius(r, gamma);
  // exp underflows to exactly 0 past -745, which is the intended cutoff for
  // skipping the empirical branch entirely.
  return std::exp(lg);
}

} // namespace ees
