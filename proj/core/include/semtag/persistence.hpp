#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semtag/factorization.hpp"

namespace semtag {

/// A factorization with the names that give its rows and columns meaning.
struct SavedModel {
  Factorization factors;
  std::vector<std::string> row_ids;
  std::vector<std::string> tag_names;
  std::vector<std::string> feature_names;
};

/// Matrix as CSV. Header is `topic,<column names>`; each line starts with the
/// topic index. Values round-trip exactly.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M,
                      const std::vector<std::string>& col_names);
/// Throws ParseError.
Eigen::MatrixXd read_matrix_csv(std::istream& in);

/// Writes <prefix>.X.csv, <prefix>.Y_t.csv, <prefix>.Y_f.csv and the sidecar
/// <prefix>.model.json. Empty name lists get numbered placeholders.
/// Throws IoError, ShapeMismatch.
void save_model(const std::filesystem::path& prefix, const SavedModel& model);

/// Throws IoError (missing files), ParseError, ShapeMismatch.
SavedModel load_model(const std::filesystem::path& prefix);

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix);

}  // namespace semtag
