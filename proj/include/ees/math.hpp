#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "ees/errors.hpp"

namespace ees {

inline constexpr double log_two_pi = 1.8378770664093454836;

//! Cholesky factorization with a diagonal jitter ladder. Jitter starts at
//! 1e-12 relative to the mean diagonal and grows tenfold up to 1e-6; above
//! that the matrix is treated as numerically indefinite.
inline Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& a)
{
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success)
    return llt;

  const double scale = a.diagonal().cwiseAbs().mean();
  for (double jitter = 1e-12; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    Eigen::MatrixXd tweaked = a;
    tweaked.diagonal().array() += jitter * (scale > 0 ? scale : 1.0);
    llt.compute(tweaked);
    if (llt.info() == Eigen::Success)
      return llt;
  }
  throw factorization_error("matrix not positive definite within jitter ladder");
}

//! log det of a matrix given its Cholesky factor.
inline double log_det_from_cholesky(const Eigen::LLT<Eigen::MatrixXd>& llt)
{
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

//! Multivariate normal log density.
inline double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                              const Eigen::LLT<Eigen::MatrixXd>& sigma_llt)
{
  const Eigen::VectorXd w = sigma_llt.matrixL().solve(x - mu);
  return -0.5 * static_cast<double>(x.size()) * log_two_pi -
         0.5 * log_det_from_cholesky(sigma_llt) - 0.5 * w.squaredNorm();
}

//! Standard normal CDF.
inline double norm_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

//! Standard normal quantile (Acklam's rational approximation, polished with
//! one Halley step; absolute error well below 1e-12 on (0, 1)).
inline double norm_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0)
      return -std::numeric_limits<double>::infinity();
    if (p == 1.0)
      return std::numeric_limits<double>::infinity();
    throw invalid_input_error("norm_quantile: p outside [0, 1]");
  }

  static const double a[] = { -3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00 };
  static const double b[] = { -5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01 };
  static const double c[] = { -7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00 };
  static const double d[] = { 7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00 };

  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement against the exact CDF.
  const double e = norm_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

//! log(mean(exp(v))) with max-shift.
inline double log_mean_exp(const Eigen::ArrayXd& v)
{
  const double vmax = v.maxCoeff();
  if (!std::isfinite(vmax))
    return vmax;
  return vmax + std::log((v - vmax).exp().mean());
}

} // namespace ees
