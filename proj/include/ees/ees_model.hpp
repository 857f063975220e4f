#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>

#include "ees/cgf.hpp"
#include "ees/errors.hpp"
#include "ees/math.hpp"
#include "ees/parallel.hpp"
#include "ees/rng.hpp"

namespace ees {

//! Result of solving the saddlepoint equation K'(lambda) = s.
struct SaddleSolution {
  Eigen::VectorXd lambda_hat;  //!< solution, original statistic units
  double residual_norm = 0.0;  //!< ||K'(lambda_hat) - s||_2, original units
  int iterations = 0;
  double mixture_weight = 1.0; //!< g(s, gamma) at the query point
};

struct NormalizeResult;

//! Fitted extended empirical saddlepoint density estimator.
//!
//! Samples are stored standardized: centered at the sample mean and whitened
//! by the lower Cholesky factor of the unbiased sample covariance. All
//! queries are mapped into that space, where the Gaussian component of the
//! tilted CGF has mean zero and identity covariance, and mapped back with a
//! log-determinant correction. A fitted model is immutable, so concurrent
//! read-only queries from multiple workers are safe.
class EesModel {
public:
  EesModel() = default;

  //! Fits moments, the standardization transform and the whitened sample
  //! store. gamma >= 0 blends the empirical and Gaussian CGF branches;
  //! gamma = +inf selects the Gaussian branch identically.
  static EesModel fit(const StatMatrix& samples, double gamma, std::uint64_t seed = 0)
  {
    if (std::isnan(gamma) || gamma < 0.0)
      throw invalid_input_error("fit: gamma must be nonnegative");
    if (!samples.allFinite())
      throw invalid_input_error("fit: samples contain non-finite entries");

    const Eigen::Index m = samples.rows();
    const Eigen::Index d = samples.cols();
    if (d < 1)
      throw invalid_input_error("fit: empty statistic vectors");
    if (m <= d)
      throw insufficient_samples_error("fit: need at least d+1 samples, got m=" +
                                       std::to_string(m) + " for d=" + std::to_string(d));

    EesModel model;
    model.mu_hat_ = samples.colwise().mean();
    Eigen::MatrixXd centered = samples.rowwise() - model.mu_hat_.transpose();
    model.sigma_hat_ = Eigen::MatrixXd::Zero(d, d);
    model.sigma_hat_.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(),
                                                                1.0 / static_cast<double>(m - 1));
    model.sigma_hat_.triangularView<Eigen::StrictlyUpper>() = model.sigma_hat_.transpose();

    // Rank check on the correlation matrix so it is scale-free.
    Eigen::VectorXd sd = model.sigma_hat_.diagonal().cwiseSqrt();
    if ((sd.array() <= 0.0).any())
      throw rank_error("fit: a statistic has zero sample variance");
    Eigen::MatrixXd corr =
      sd.cwiseInverse().asDiagonal() * model.sigma_hat_ * sd.cwiseInverse().asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> corr_llt(corr);
    if (corr_llt.info() != Eigen::Success ||
        corr_llt.matrixLLT().diagonal().minCoeff() < 1e-8)
      throw rank_error("fit: centered samples are numerically rank deficient");

    model.chol_lower_ = sd.asDiagonal() * Eigen::MatrixXd(corr_llt.matrixL());
    model.log_det_chol_ = model.chol_lower_.diagonal().array().log().sum();

    auto z = std::make_shared<Eigen::MatrixXd>(
      model.chol_lower_.triangularView<Eigen::Lower>()
        .solve(centered.transpose())
        .transpose());
    model.z_samples_ = std::move(z);
    model.gamma_ = gamma;
    model.seed_ = seed;
    return model;
  }

  Eigen::Index dim() const { return mu_hat_.size(); }
  Eigen::Index sample_count() const { return z_samples_ ? z_samples_->rows() : 0; }
  const Eigen::VectorXd& mu_hat() const { return mu_hat_; }
  const Eigen::MatrixXd& sigma_hat() const { return sigma_hat_; }
  const Eigen::MatrixXd& transform_lower() const { return chol_lower_; }
  const Eigen::MatrixXd& standardized_samples() const { return *z_samples_; }
  double gamma() const { return gamma_; }
  std::uint64_t seed() const { return seed_; }
  const std::optional<double>& log_z() const { return log_z_; }
  bool fitted() const { return static_cast<bool>(z_samples_); }

  //! Copy sharing the standardized sample store but with a different gamma.
  //! Any normalizing constant is dropped, since it depends on gamma.
  EesModel with_gamma(double gamma) const
  {
    if (std::isnan(gamma) || gamma < 0.0)
      throw invalid_input_error("with_gamma: gamma must be nonnegative");
    EesModel out = *this;
    out.gamma_ = gamma;
    out.log_z_.reset();
    return out;
  }

  EesModel with_log_z(double log_z) const
  {
    EesModel out = *this;
    out.log_z_ = log_z;
    return out;
  }

  //! Query -> standardized coordinates.
  Eigen::VectorXd to_standardized(const Eigen::VectorXd& s) const
  {
    return chol_lower_.triangularView<Eigen::Lower>().solve(s - mu_hat_);
  }

  //! Mixture weight g(s, gamma) at a query point.
  double mixture_weight_at(const Eigen::VectorXd& s) const
  {
    check_fitted();
    return std::exp(log_mixture_weight_from_radius(to_standardized(s).squaredNorm(), gamma_));
  }

  //! Tilted CGF g K_emp + (1 - g) K_gauss and its derivatives, in original
  //! statistic units. The weight depends on the query s only, so the
  //! derivatives in lambda are the same convex combination.
  CgfEval extended_cgf(const Eigen::VectorXd& lambda, const Eigen::VectorXd& s) const
  {
    check_fitted();
    if (!lambda.allFinite() || !s.allFinite())
      throw invalid_input_error("extended_cgf: non-finite input");
    const double g = mixture_weight_at(s);
    const Eigen::VectorXd lambda_z = chol_lower_.transpose() * lambda;
    const CgfEval ez = extended_cgf_std(lambda_z, g);

    CgfEval out;
    out.value = lambda.dot(mu_hat_) + ez.value;
    out.grad = mu_hat_ + chol_lower_ * ez.grad;
    out.hess = chol_lower_ * ez.hess * chol_lower_.transpose();
    return out;
  }

  //! Solves K'(lambda) = s for the tilted CGF by damped Newton iterations.
  //! Converges for any finite s whenever gamma > 0; with gamma = 0 and s
  //! outside the convex hull of the samples the equation has no solution and
  //! a solver_error is raised once the iteration cap is reached.
  SaddleSolution solve_saddlepoint(const Eigen::VectorXd& s) const
  {
    return to_solution(solve_std(s));
  }

  //! Saddlepoint log density at s; subtracts the stored log normalizing
  //! constant when the model has been normalized.
  double log_density(const Eigen::VectorXd& s, SaddleSolution* diagnostics = nullptr) const
  {
    const SolveDetail detail = solve_std(s);
    if (diagnostics)
      *diagnostics = to_solution(detail);
    double out = log_density_std_from(detail) - log_det_chol_;
    if (log_z_)
      out -= *log_z_;
    return out;
  }

  //! Exact normal log density under the fitted moments (the g = 0 branch).
  double gaussian_log_density(const Eigen::VectorXd& s) const
  {
    check_fitted();
    const double d = static_cast<double>(dim());
    return -0.5 * d * log_two_pi - log_det_chol_ - 0.5 * to_standardized(s).squaredNorm();
  }

  NormalizeResult normalize(Eigen::Index l, std::uint64_t rng_seed, int n_jobs = 1) const;

private:
  struct SolveDetail {
    Eigen::VectorXd lambda_z;
    Eigen::VectorXd z;
    CgfEval eval; // extended CGF at lambda_z, standardized space
    double g = 1.0;
    int iterations = 0;
  };

  void check_fitted() const
  {
    if (!fitted())
      throw invalid_input_error("EesModel: not fitted");
  }

  //! Extended CGF in standardized space, where the Gaussian branch has mean
  //! zero and identity covariance. g = 0 skips the empirical branch.
  CgfEval extended_cgf_std(const Eigen::VectorXd& lambda_z, double g) const
  {
    const Eigen::Index d = dim();
    CgfEval out;
    if (g <= 0.0) {
      out.value = 0.5 * lambda_z.squaredNorm();
      out.grad = lambda_z;
      out.hess = Eigen::MatrixXd::Identity(d, d);
      return out;
    }
    out = empirical_cgf(*z_samples_, lambda_z);
    if (g < 1.0) {
      out.value = g * out.value + (1.0 - g) * 0.5 * lambda_z.squaredNorm();
      out.grad = g * out.grad + (1.0 - g) * lambda_z;
      out.hess *= g;
      out.hess.diagonal().array() += 1.0 - g;
    }
    return out;
  }

  SolveDetail solve_std(const Eigen::VectorXd& s) const
  {
    check_fitted();
    if (!s.allFinite())
      throw invalid_input_error("solve_saddlepoint: non-finite query");

    SolveDetail detail;
    detail.z = to_standardized(s);
    detail.g = std::exp(log_mixture_weight_from_radius(detail.z.squaredNorm(), gamma_));
    detail.lambda_z = Eigen::VectorXd::Zero(dim());
    detail.eval = extended_cgf_std(detail.lambda_z, detail.g);

    const double znorm = detail.z.norm();
    const double tol_target = 1e-10 * (1.0 + znorm);
    const double tol_contract = 1e-8 * (1.0 + znorm);
    constexpr int max_iterations = 200;
    constexpr double armijo = 1e-4;

    Eigen::VectorXd residual = detail.eval.grad - detail.z;
    for (int iter = 0; iter < max_iterations; ++iter) {
      const double rnorm = residual.norm();
      if (rnorm <= tol_target) {
        detail.iterations = iter;
        return detail;
      }

      const Eigen::LLT<Eigen::MatrixXd> hess_llt = cholesky_with_jitter(detail.eval.hess);
      const Eigen::VectorXd step = hess_llt.solve(-residual);

      // Backtracking on phi = ||K'(lambda) - z||^2 / 2; the Newton direction
      // gives directional derivative -||residual||^2.
      const double phi0 = 0.5 * rnorm * rnorm;
      double alpha = 1.0;
      bool accepted = false;
      CgfEval trial_eval;
      Eigen::VectorXd trial_lambda;
      while (alpha >= 1e-14) {
        trial_lambda = detail.lambda_z + alpha * step;
        if (!trial_lambda.allFinite()) {
          alpha *= 0.5;
          continue;
        }
        trial_eval = extended_cgf_std(trial_lambda, detail.g);
        const double phi = 0.5 * (trial_eval.grad - detail.z).squaredNorm();
        if (phi <= phi0 - armijo * alpha * rnorm * rnorm) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        detail.iterations = iter + 1;
        break; // stalled; fall through to the contract check
      }
      detail.lambda_z = trial_lambda;
      detail.eval = trial_eval;
      residual = detail.eval.grad - detail.z;
      detail.iterations = iter + 1;
    }

    if (residual.norm() <= tol_contract)
      return detail;

    const Eigen::VectorXd lambda_orig =
      chol_lower_.transpose().triangularView<Eigen::Upper>().solve(detail.lambda_z);
    throw solver_error("solve_saddlepoint: no convergence within iteration cap",
                       lambda_orig, (chol_lower_ * residual).norm(), detail.iterations);
  }

  SaddleSolution to_solution(const SolveDetail& detail) const
  {
    SaddleSolution sol;
    sol.lambda_hat =
      chol_lower_.transpose().triangularView<Eigen::Upper>().solve(detail.lambda_z);
    sol.residual_norm = (chol_lower_ * (detail.eval.grad - detail.z)).norm();
    sol.iterations = detail.iterations;
    sol.mixture_weight = detail.g;
    return sol;
  }

  //! Unnormalized saddlepoint log density in standardized space.
  double log_density_std_from(const SolveDetail& detail) const
  {
    const double d = static_cast<double>(dim());
    const Eigen::LLT<Eigen::MatrixXd> hess_llt = cholesky_with_jitter(detail.eval.hess);
    return -0.5 * d * log_two_pi - 0.5 * log_det_from_cholesky(hess_llt) +
           detail.eval.value - detail.lambda_z.dot(detail.z);
  }

  double log_density_std(const Eigen::VectorXd& z) const
  {
    SolveDetail detail = solve_std_from_z(z);
    return log_density_std_from(detail);
  }

  SolveDetail solve_std_from_z(const Eigen::VectorXd& z) const
  {
    // Same solve as solve_std but the query is already standardized.
    return solve_std(mu_hat_ + chol_lower_ * z);
  }

  std::shared_ptr<const Eigen::MatrixXd> z_samples_;
  Eigen::VectorXd mu_hat_;
  Eigen::MatrixXd sigma_hat_;
  Eigen::MatrixXd chol_lower_;
  double log_det_chol_ = 0.0;
  double gamma_ = 0.0;
  std::optional<double> log_z_;
  std::uint64_t seed_ = 0;

  friend struct NormalizeResult;
  friend NormalizeResult normalize_impl(const EesModel&, Eigen::Index, std::uint64_t, int);
};

//! Importance-sampling estimate of the normalizing constant.
struct NormalizeResult {
  EesModel model;     //!< copy of the input model with log_z set
  double z_hat = 0.0; //!< estimated normalizing constant
  double std_error = 0.0;
};

inline NormalizeResult normalize_impl(const EesModel& model, Eigen::Index l,
                                      std::uint64_t rng_seed, int n_jobs)
{
  if (l < 1)
    throw invalid_input_error("normalize: need at least one importance sample");
  model.check_fitted();

  const Eigen::Index d = model.dim();
  Eigen::VectorXd weights(l);

  // The importance density is the Gaussian fitted to the samples, which is a
  // standard normal in standardized space; the transform determinants cancel
  // in the weight ratio, and the tail decay of the mixture keeps the weights
  // bounded.
  parallel_for(
    l,
    [&](std::int64_t j) {
      auto engine = make_engine(child_seed(rng_seed, static_cast<std::uint64_t>(j)));
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::VectorXd z(d);
      for (Eigen::Index k = 0; k < d; ++k)
        z(k) = normal(engine);
      double log_weight;
      try {
        const double log_p = model.log_density_std(z);
        const double log_q = -0.5 * static_cast<double>(d) * log_two_pi - 0.5 * z.squaredNorm();
        log_weight = log_p - log_q;
      } catch (const solver_error& e) {
        throw normalization_error(std::string("normalize: solver failed at a proposal point (") +
                                  e.what() + ")");
      }
      if (std::isnan(log_weight) || log_weight == std::numeric_limits<double>::infinity())
        throw normalization_error("normalize: non-finite importance weight");
      weights(j) = std::exp(log_weight);
    },
    n_jobs);

  NormalizeResult out;
  out.z_hat = weights.mean();
  if (!(out.z_hat > 0.0) || !std::isfinite(out.z_hat))
    throw normalization_error("normalize: estimated constant is not positive");
  if (l > 1)
    out.std_error = std::sqrt((weights.array() - out.z_hat).square().sum() /
                              static_cast<double>(l - 1) / static_cast<double>(l));
  out.model = model.with_log_z(std::log(out.z_hat));
  return out;
}

inline NormalizeResult EesModel::normalize(Eigen::Index l, std::uint64_t rng_seed,
                                           int n_jobs) const
{
  return normalize_impl(*this, l, rng_seed, n_jobs);
}

} // namespace ees
