#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ees {

//! Base class for all errors raised by this library.
class error : public std::runtime_error {
public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

//! Malformed caller input (non-finite values, negative tuning parameters, ...).
class invalid_input_error : public error {
public:
  using error::error;
};

//! Centered sample matrix does not have full column rank.
class rank_error : public error {
public:
  using error::error;
};

//! Fewer samples than the estimator requires (m <= d).
class insufficient_samples_error : public error {
public:
  using error::error;
};

//! A matrix expected to be positive definite could not be factorized.
class factorization_error : public error {
public:
  using error::error;
};

//! Newton solver exhausted its iteration budget. Carries the last iterate.
class solver_error : public error {
public:
  solver_error(const std::string& msg, Eigen::VectorXd last_iterate,
               double residual_norm, int iterations)
    : error(msg)
    , last_iterate(std::move(last_iterate))
    , residual_norm(residual_norm)
    , iterations(iterations)
  {}

  Eigen::VectorXd last_iterate;
  double residual_norm;
  int iterations;
};

//! Importance-sampling normalization produced a non-finite weight.
class normalization_error : public error {
public:
  using error::error;
};

//! Synthetic-likelihood estimate could not be formed (too many invalid
//! simulations, singular moment matrix, ...).
class estimate_error : public error {
public:
  using error::error;
};

//! Cross-validation failed (a fold exceeded the solver-failure budget).
class tuning_error : public error {
public:
  using error::error;
};

//! All particles of an optimizer step were assigned zero weight.
//! Carries the natural-space trace accumulated so far, one row per iteration.
class optimization_error : public error {
public:
  optimization_error(const std::string& msg, Eigen::MatrixXd partial_trace)
    : error(msg), partial_trace(std::move(partial_trace))
  {}

  Eigen::MatrixXd partial_trace;
};

//! ABC tolerance calibration failed (no acceptances, infeasible bracket).
class calibration_error : public error {
public:
  using error::error;
};

//! Bad experiment or CLI configuration.
class config_error : public error {
public:
  using error::error;
};

} // namespace ees
