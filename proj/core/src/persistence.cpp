#include "semtag/persistence.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "semtag/error.hpp"

namespace semtag {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> placeholders(const std::vector<std::string>& names, Index n, const char* stem) {
  if (!names.empty()) {
    if (static_cast<Index>(names.size()) != n) {
      throw Error(ErrorCode::ShapeMismatch, std::string(stem) + " name count does not match the matrix");
    }
    return names;
  }
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return in;
}

double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j.at(key).is_array()) throw Error(ErrorCode::ParseError, std::string(key) + " must be an array");
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M, const std::vector<std::string>& col_names) {
  const auto names = placeholders(col_names, M.cols(), "c");
  out << "topic";
  for (const auto& n : names) out << ',' << csv_field(n);
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index r = 0; r < M.rows(); ++r) {
    out << r;
    for (Index c = 0; c < M.cols(); ++c) out << ',' << M(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty matrix file");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> vals;
    std::size_t start = line.find(',');
    while (start != std::string::npos) {
      const std::size_t end = line.find(',', start + 1);
      vals.push_back(parse_double(std::string_view(line).substr(start + 1, end == std::string::npos ? std::string::npos : end - start - 1), lineno));
      start = end;
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(vals));
  }
  const Index r = static_cast<Index>(rows.size());
  const Index c = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  Eigen::MatrixXd M(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return M;
}

void save_model(const std::filesystem::path& prefix, const SavedModel& model) {
  const auto& f = model.factors;
  if (f.Y_t.rows() != f.rank() || f.Y_f.rows() != f.rank()) {
    throw Error(ErrorCode::ShapeMismatch, "factor blocks disagree on rank");
  }
  const auto rows = placeholders(model.row_ids, f.rows(), "row");
  const auto tags = placeholders(model.tag_names, f.tag_cols(), "tag");
  const auto feats = placeholders(model.feature_names, f.feature_cols(), "feature");

  {
    auto out = open_out(with_suffix(prefix, ".X.csv"));
    write_matrix_csv(out, f.X, rows);
  }
  {
    auto out = open_out(with_suffix(prefix, ".Y_t.csv"));
    write_matrix_csv(out, f.Y_t, tags);
  }
  {
    auto out = open_out(with_suffix(prefix, ".Y_f.csv"));
    write_matrix_csv(out, f.Y_f, feats);
  }
  nlohmann::json side;
  side["k"] = f.rank();
  side["n_tag_cols"] = f.tag_cols();
  side["n_feat_cols"] = f.feature_cols();
  side["row_ids"] = rows;
  side["tag_names"] = tags;
  side["feature_names"] = feats;
  auto out = open_out(with_suffix(prefix, ".model.json"));
  out << side.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + prefix.string());
}

SavedModel load_model(const std::filesystem::path& prefix) {
  nlohmann::json side;
  {
    auto in = open_in(with_suffix(prefix, ".model.json"));
    try {
      in >> side;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "model sidecar: " + std::string(e.what()));
    }
  }
  SavedModel m;
  try {
    m.row_ids = string_list(side, "row_ids");
    m.tag_names = string_list(side, "tag_names");
    m.feature_names = string_list(side, "feature_names");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "model sidecar: " + std::string(e.what()));
  }
  auto load = [&](const char* suffix) {
    auto in = open_in(with_suffix(prefix, suffix));
    return read_matrix_csv(in);
  };
  m.factors.X = load(".X.csv");
  m.factors.Y_t = load(".Y_t.csv");
  m.factors.Y_f = load(".Y_f.csv");

  const auto& f = m.factors;
  const auto k = side.value("k", Index{-1});
  const bool ok = f.rank() == k && f.Y_t.rows() == k && f.Y_f.rows() == k &&
                  f.tag_cols() == side.value("n_tag_cols", Index{-1}) &&
                  f.feature_cols() == side.value("n_feat_cols", Index{-1}) &&
                  static_cast<Index>(m.row_ids.size()) == f.rows() &&
                  static_cast<Index>(m.tag_names.size()) == f.tag_cols() &&
                  static_cast<Index>(m.feature_names.size()) == f.feature_cols();
  if (!ok) throw Error(ErrorCode::ShapeMismatch, "model files disagree with the sidecar");
  return m;
}

}  // namespace semtag
