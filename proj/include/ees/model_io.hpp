#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "ees/csv.hpp"
#include "ees/ees_model.hpp"
#include "ees/errors.hpp"

namespace ees {

//! JSON manifest for a fitted model: moments, gamma, optional log normalizing
//! constant, fit seed and the path of the samples CSV the fit came from.
inline nlohmann::json model_manifest(const EesModel& model, const std::string& samples_csv)
{
  nlohmann::json j;
  j["mu_hat"] = std::vector<double>(model.mu_hat().data(),
                                    model.mu_hat().data() + model.mu_hat().size());
  std::vector<double> sigma_rm;
  sigma_rm.reserve(static_cast<std::size_t>(model.dim() * model.dim()));
  for (Eigen::Index i = 0; i < model.dim(); ++i)
    for (Eigen::Index k = 0; k < model.dim(); ++k)
      sigma_rm.push_back(model.sigma_hat()(i, k));
  j["sigma_hat"] = sigma_rm;
  if (std::isinf(model.gamma()))
    j["gamma"] = "inf";
  else
    j["gamma"] = model.gamma();
  if (model.log_z())
    j["log_z"] = *model.log_z();
  else
    j["log_z"] = nullptr;
  j["seed"] = model.seed();
  j["samples_csv"] = samples_csv;
  return j;
}

//! Writes the manifest next to an existing samples CSV (the file the model
//! was fitted from).
inline void save_model(const EesModel& model, const std::string& manifest_path,
                       const std::string& samples_csv_path)
{
  std::ofstream out(manifest_path);
  if (!out)
    throw invalid_input_error("save_model: cannot open '" + manifest_path + "'");
  out << model_manifest(model, samples_csv_path).dump(2) << '\n';
}

inline double gamma_from_json(const nlohmann::json& j)
{
  if (j.is_string()) {
    if (j.get<std::string>() == "inf")
      return std::numeric_limits<double>::infinity();
    throw invalid_input_error("manifest: unrecognized gamma string");
  }
  return j.get<double>();
}

//! Rebuilds a model from a manifest: re-reads the samples CSV, refits and
//! checks the stored moments against the recomputed ones.
inline EesModel load_model(const std::string& manifest_path)
{
  std::ifstream in(manifest_path);
  if (!in)
    throw invalid_input_error("load_model: cannot open '" + manifest_path + "'");
  nlohmann::json j;
  in >> j;

  std::filesystem::path samples_path(j.at("samples_csv").get<std::string>());
  if (samples_path.is_relative())
    samples_path = std::filesystem::path(manifest_path).parent_path() / samples_path;

  const Eigen::MatrixXd samples = csv::read_matrix_file(samples_path.string());
  EesModel model = EesModel::fit(samples, gamma_from_json(j.at("gamma")),
                                 j.value("seed", std::uint64_t{ 0 }));
  if (!j.at("log_z").is_null())
    model = model.with_log_z(j.at("log_z").get<double>());

  const auto mu = j.at("mu_hat").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(mu.size()) != model.dim())
    throw invalid_input_error("load_model: manifest dimension does not match samples");
  for (Eigen::Index k = 0; k < model.dim(); ++k)
    if (std::abs(mu[static_cast<std::size_t>(k)] - model.mu_hat()(k)) >
        1e-6 * (1.0 + std::abs(model.mu_hat()(k))))
      throw invalid_input_error("load_model: manifest moments do not match samples CSV");
  return model;
}

} // namespace ees
