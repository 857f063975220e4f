#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ees/errors.hpp"

namespace ees {
namespace csv {

//! Reads a headerless CSV of decimal-point floats, one vector per row.
inline Eigen::MatrixXd read_matrix(std::istream& in)
{
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw invalid_input_error("csv: cannot parse '" + cell + "' as a number");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw invalid_input_error("csv: ragged rows (" + std::to_string(row.size()) +
                                " vs " + std::to_string(rows.front().size()) + " columns)");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    return Eigen::MatrixXd(0, 0);

  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

inline Eigen::MatrixXd read_matrix_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw invalid_input_error("csv: cannot open '" + path + "'");
  return read_matrix(in);
}

//! Writes with max_digits10 precision so a read-back reproduces the matrix
//! bit-exactly.
inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& values)
{
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j > 0)
        out << ',';
      out << values(i, j);
    }
    out << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const Eigen::MatrixXd& values)
{
  std::ofstream out(path);
  if (!out)
    throw invalid_input_error("csv: cannot open '" + path + "' for writing");
  write_matrix(out, values);
}

//! Report CSV with a header line (experiment results, CV curves, traces).
inline void write_table_file(const std::string& path,
                             const std::vector<std::string>& header,
                             const Eigen::MatrixXd& values)
{
  std::ofstream out(path);
  if (!out)
    throw invalid_input_error("csv: cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j > 0)
      out << ',';
    out << header[j];
  }
  out << '\n';
  write_matrix(out, values);
}

} // namespace csv
} // namespace ees
