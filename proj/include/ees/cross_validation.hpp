#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ees/csv.hpp"
#include "ees/ees_model.hpp"
#include "ees/errors.hpp"
#include "ees/parallel.hpp"
#include "ees/rng.hpp"

namespace ees {

//! Outcome of the k-fold search over the gamma grid.
struct CvResult {
  Eigen::VectorXd gamma_grid;      //!< increasing positive grid
  Eigen::MatrixXd fold_losses;     //!< k x r negative validation log-likelihoods
  Eigen::VectorXd mean_loss;       //!< fold average per grid point
  double selected_gamma = 0.0;     //!< grid argmin, ties toward larger gamma
  std::vector<std::uint64_t> fold_seeds;
  Eigen::MatrixXi solver_failures; //!< k x r counts of validation fallbacks
};

//! Default search grid: 13 points log-spaced on [1e-4, 1e2].
inline Eigen::VectorXd default_gamma_grid(int r = 13, double lo = 1e-4, double hi = 1e2)
{
  Eigen::VectorXd grid(r);
  for (int i = 0; i < r; ++i)
    grid(i) = std::pow(10.0, std::log10(lo) +
                               (std::log10(hi) - std::log10(lo)) * i /
                                 static_cast<double>(r - 1));
  return grid;
}

//! k-fold cross-validation with nested importance-sampling normalization.
//!
//! For each (gamma, fold) cell the estimator is fitted on the training folds,
//! normalized with l importance draws, and scored by the mean negative log
//! density of the held-out fold. A validation point where the saddlepoint
//! solver fails contributes the Gaussian-branch density instead and is
//! counted; a fold where more than 10% of points fail raises tuning_error.
//! Cells are independent and may run in parallel; per-cell seeds derive from
//! (rng_seed, fold), so fold_losses is reproducible bit-identically.
inline CvResult cross_validate_gamma(const StatMatrix& samples,
                                     const Eigen::VectorXd& gamma_grid, int k,
                                     Eigen::Index l, std::uint64_t rng_seed,
                                     int n_jobs = 1)
{
  const Eigen::Index m = samples.rows();
  const int r = static_cast<int>(gamma_grid.size());
  if (k < 2)
    throw invalid_input_error("cross_validate_gamma: need k >= 2 folds");
  if (r < 1)
    throw invalid_input_error("cross_validate_gamma: empty gamma grid");
  for (int i = 0; i < r; ++i) {
    if (!(gamma_grid(i) > 0.0) || !std::isfinite(gamma_grid(i)))
      throw invalid_input_error("cross_validate_gamma: grid must be strictly positive");
    if (i > 0 && gamma_grid(i) <= gamma_grid(i - 1))
      throw invalid_input_error("cross_validate_gamma: grid must be strictly increasing");
  }
  if (m < 2 * k)
    throw invalid_input_error("cross_validate_gamma: too few samples for k folds");

  // Permutation-derived partition; the last fold absorbs the remainder.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Eigen::Index{ 0 });
  auto shuffle_engine = make_engine(child_seed(rng_seed, 0));
  std::shuffle(perm.begin(), perm.end(), shuffle_engine);

  const Eigen::Index base_size = m / k;
  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) {
    const Eigen::Index begin = t * base_size;
    const Eigen::Index end = (t == k - 1) ? m : begin + base_size;
    folds[static_cast<std::size_t>(t)].assign(perm.begin() + begin, perm.begin() + end);
  }

  CvResult result;
  result.gamma_grid = gamma_grid;
  result.fold_losses = Eigen::MatrixXd::Zero(k, r);
  result.solver_failures = Eigen::MatrixXi::Zero(k, r);
  result.fold_seeds.resize(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t)
    result.fold_seeds[static_cast<std::size_t>(t)] =
      child_seed(rng_seed, 1 + static_cast<std::uint64_t>(t));

  // One fit per fold, shared across the grid via with_gamma.
  std::vector<EesModel> base_models(static_cast<std::size_t>(k));
  std::vector<Eigen::MatrixXd> validation(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) {
    const auto& val_idx = folds[static_cast<std::size_t>(t)];
    Eigen::MatrixXd train(m - static_cast<Eigen::Index>(val_idx.size()), samples.cols());
    Eigen::MatrixXd val(static_cast<Eigen::Index>(val_idx.size()), samples.cols());
    std::vector<bool> in_val(static_cast<std::size_t>(m), false);
    for (Eigen::Index idx : val_idx)
      in_val[static_cast<std::size_t>(idx)] = true;
    Eigen::Index ti = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (!in_val[static_cast<std::size_t>(i)])
        train.row(ti++) = samples.row(i);
    for (std::size_t vi = 0; vi < val_idx.size(); ++vi)
      val.row(static_cast<Eigen::Index>(vi)) = samples.row(val_idx[vi]);
    base_models[static_cast<std::size_t>(t)] = EesModel::fit(train, gamma_grid(0), rng_seed);
    validation[static_cast<std::size_t>(t)] = std::move(val);
  }

  parallel_for(
    static_cast<std::int64_t>(k) * r,
    [&](std::int64_t cell) {
      const int t = static_cast<int>(cell % k);
      const int i = static_cast<int>(cell / k);
      const EesModel model =
        base_models[static_cast<std::size_t>(t)].with_gamma(gamma_grid(i));
      const std::uint64_t cell_seed =
        child_seed(result.fold_seeds[static_cast<std::size_t>(t)],
                   static_cast<std::uint64_t>(i));
      const NormalizeResult norm = model.normalize(l, cell_seed, 1);

      const Eigen::MatrixXd& val = validation[static_cast<std::size_t>(t)];
      double loss = 0.0;
      int failures = 0;
      for (Eigen::Index v = 0; v < val.rows(); ++v) {
        double log_p;
        try {
          log_p = norm.model.log_density(val.row(v).transpose());
        } catch (const solver_error&) {
          ++failures;
          log_p = model.gaussian_log_density(val.row(v).transpose());
        }
        loss -= log_p;
      }
      if (failures > 0.1 * static_cast<double>(val.rows()))
        throw tuning_error("cross_validate_gamma: fold " + std::to_string(t) +
                           " exceeded the solver-failure budget at gamma=" +
                           std::to_string(gamma_grid(i)));
      result.fold_losses(t, i) = loss / static_cast<double>(val.rows());
      result.solver_failures(t, i) = failures;
    },
    n_jobs);

  result.mean_loss = result.fold_losses.colwise().mean();
  int best = 0;
  for (int i = 1; i < r; ++i)
    if (result.mean_loss(i) <= result.mean_loss(best))
      best = i;
  result.selected_gamma = gamma_grid(best);

  for (int t = 0; t < k; ++t)
    for (int i = 0; i < r; ++i)
      if (!std::isfinite(result.fold_losses(t, i)))
        throw tuning_error("cross_validate_gamma: non-finite validation loss");
  return result;
}

//! CV curve as a table: gamma, fold_1..fold_k, mean.
inline void write_cv_curve(const std::string& path, const CvResult& result)
{
  const int k = static_cast<int>(result.fold_losses.rows());
  const int r = static_cast<int>(result.gamma_grid.size());
  std::vector<std::string> header{ "gamma" };
  for (int t = 1; t <= k; ++t)
    header.push_back("fold_" + std::to_string(t));
  header.push_back("mean");

  Eigen::MatrixXd table(r, k + 2);
  table.col(0) = result.gamma_grid;
  table.block(0, 1, r, k) = result.fold_losses.transpose();
  table.col(k + 1) = result.mean_loss;
  csv::write_table_file(path, header, table);
}

} // namespace ees
