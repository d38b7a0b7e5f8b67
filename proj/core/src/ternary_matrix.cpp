#include "semtag/ternary_matrix.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "semtag/error.hpp"

namespace semtag {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingInFeatureBlock: return "MissingInFeatureBlock";
    case ErrorCode::DuplicateCoordinate: return "DuplicateCoordinate";
    case ErrorCode::FillOutOfRange: return "FillOutOfRange";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateDatasetId: return "DuplicateDatasetId";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularGauge: return "SingularGauge";
    case ErrorCode::KMismatch: return "KMismatch";
    case ErrorCode::IllConditionedTagBlock: return "IllConditionedTagBlock";
    case ErrorCode::InvalidRank: return "InvalidRank";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyObservedSet: return "EmptyObservedSet";
    case ErrorCode::AnchorOutOfTagBlock: return "AnchorOutOfTagBlock";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::TopicOutOfRange: return "TopicOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

char to_char(TernaryValue v) noexcept {
  switch (v) {
    case TernaryValue::Zero: return '0';
    case TernaryValue::One: return '1';
    case TernaryValue::Missing: return '?';
  }
  return '0';
}

TernaryMatrix TernaryMatrix::build(Index n_rows, Index n_tag_cols, Index n_feat_cols,
                                   std::span<const Triplet> triplets) {
  if (n_rows < 0 || n_tag_cols < 0 || n_feat_cols < 0) {
    throw Error(ErrorCode::OutOfRange, "negative matrix dimension");
  }
  TernaryMatrix m;
  m.n_rows_ = n_rows;
  m.n_tag_cols_ = n_tag_cols;
  m.n_feat_cols_ = n_feat_cols;

  const Index n_cols = n_tag_cols + n_feat_cols;
  m.entries_.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols) {
      throw Error(ErrorCode::OutOfRange, "coordinate (" + std::to_string(t.row) + ", " +
                                             std::to_string(t.col) + ") outside " +
                                             std::to_string(n_rows) + "x" +
                                             std::to_string(n_cols));
    }
    if (t.value == TernaryValue::Missing && t.col >= n_tag_cols) {
      throw Error(ErrorCode::MissingInFeatureBlock,
                  "missing value at feature column " + std::to_string(t.col));
    }
    m.entries_.push_back(t);
  }

  std::stable_sort(m.entries_.begin(), m.entries_.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t i = 1; i < m.entries_.size(); ++i) {
    if (m.entries_[i].row == m.entries_[i - 1].row && m.entries_[i].col == m.entries_[i - 1].col) {
      throw Error(ErrorCode::DuplicateCoordinate,
                  "(" + std::to_string(m.entries_[i].row) + ", " +
                      std::to_string(m.entries_[i].col) + ")");
    }
  }
  std::erase_if(m.entries_, [](const Triplet& t) { return t.value == TernaryValue::Zero; });

  m.row_start_.assign(static_cast<std::size_t>(n_rows) + 1, 0);
  for (const auto& t : m.entries_) {
    ++m.row_start_[static_cast<std::size_t>(t.row) + 1];
    if (t.value == TernaryValue::Missing) ++m.n_missing_;
  }
  for (std::size_t i = 1; i < m.row_start_.size(); ++i) m.row_start_[i] += m.row_start_[i - 1];
  return m;
}

std::span<const Triplet> TernaryMatrix::row_entries(Index row) const {
  if (row < 0 || row >= n_rows_) throw Error(ErrorCode::OutOfRange, "row " + std::to_string(row));
  const auto begin = row_start_[static_cast<std::size_t>(row)];
  const auto end = row_start_[static_cast<std::size_t>(row) + 1];
  return std::span<const Triplet>(entries_).subspan(begin, end - begin);
}

TernaryValue TernaryMatrix::at(Index row, Index col) const {
  if (col < 0 || col >= cols()) throw Error(ErrorCode::OutOfRange, "col " + std::to_string(col));
  const auto r = row_entries(row);
  const auto it = std::lower_bound(r.begin(), r.end(), col,
                                   [](const Triplet& t, Index c) { return t.col < c; });
  if (it != r.end() && it->col == col) return it->value;
  return TernaryValue::Zero;
}

ObservedSet TernaryMatrix::observed_set() const {
  ObservedSet s;
  s.n_rows_ = n_rows_;
  s.n_cols_ = cols();
  s.row_offset_.assign(static_cast<std::size_t>(n_rows_) + 1, 0);
  s.missing_start_.assign(static_cast<std::size_t>(n_rows_) + 1, 0);
  s.missing_cols_.reserve(static_cast<std::size_t>(n_missing_));
  for (Index i = 0; i < n_rows_; ++i) {
    Index missing_in_row = 0;
    for (const auto& t : row_entries(i)) {
      if (t.value == TernaryValue::Missing) {
        s.missing_cols_.push_back(t.col);
        ++missing_in_row;
      }
    }
    const auto iu = static_cast<std::size_t>(i);
    s.missing_start_[iu + 1] = s.missing_cols_.size();
    s.row_offset_[iu + 1] = s.row_offset_[iu] + (cols() - missing_in_row);
  }
  s.size_ = s.row_offset_.back();
  return s;
}

DenseMatrix TernaryMatrix::impute(double fill) const {
  if (!(fill >= 0.0 && fill <= 1.0)) {
    throw Error(ErrorCode::FillOutOfRange, "fill must lie in [0, 1]");
  }
  DenseMatrix d = DenseMatrix::Zero(n_rows_, cols());
  for (const auto& t : entries_) {
    d(t.row, t.col) = t.value == TernaryValue::One ? 1.0 : fill;
  }
  return d;
}

Eigen::SparseMatrix<double> TernaryMatrix::impute_sparse(double fill) const {
  if (!(fill >= 0.0 && fill <= 1.0)) {
    throw Error(ErrorCode::FillOutOfRange, "fill must lie in [0, 1]");
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(entries_.size());
  for (const auto& t : entries_) {
    const double v = t.value == TernaryValue::One ? 1.0 : fill;
    if (v != 0.0) trip.emplace_back(t.row, t.col, v);
  }
  Eigen::SparseMatrix<double> s(n_rows_, cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

TernaryMatrix TernaryMatrix::with_extra_tag_cols(Index n_new) const {
  if (n_new < 1) throw Error(ErrorCode::InvalidArgument, "need at least one new tag column");
  std::vector<Triplet> out;
  out.reserve(entries_.size() + static_cast<std::size_t>(n_rows_ * n_new));
  for (const auto& t : entries_) {
    out.push_back({t.row, t.col < n_tag_cols_ ? t.col : t.col + n_new, t.value});
  }
  for (Index i = 0; i < n_rows_; ++i) {
    for (Index j = 0; j < n_new; ++j) out.push_back({i, n_tag_cols_ + j, TernaryValue::Missing});
  }
  return build(n_rows_, n_tag_cols_ + n_new, n_feat_cols_, out);
}

void TernaryMatrix::write(std::ostream& out) const {
  out << n_rows_ << ' ' << n_tag_cols_ << ' ' << n_feat_cols_ << '\n';
  for (const auto& t : entries_) {
    out << t.row << ' ' << t.col << ' ' << to_char(t.value) << '\n';
  }
}

TernaryMatrix TernaryMatrix::read(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw Error(ErrorCode::ParseError, "empty matrix file");

  Index m = 0, nt = 0, nf = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> m >> nt >> nf) || (hs >> extra)) {
      throw Error(ErrorCode::ParseError, "line 1: expected header `m n_t n_f`");
    }
  }
  std::vector<Triplet> triplets;
  while (next_line()) {
    std::istringstream ls(line);
    Index r = 0, c = 0;
    std::string v, extra;
    if (!(ls >> r >> c >> v) || (ls >> extra) || (v != "1" && v != "?")) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected `row col v` with v in {1, ?}");
    }
    triplets.push_back({r, c, v == "1" ? TernaryValue::One : TernaryValue::Missing});
  }
  return build(m, nt, nf, triplets);
}

bool operator==(const TernaryMatrix& a, const TernaryMatrix& b) {
  if (a.n_rows_ != b.n_rows_ || a.n_tag_cols_ != b.n_tag_cols_ || a.n_feat_cols_ != b.n_feat_cols_ ||
      a.entries_.size() != b.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.row != y.row || x.col != y.col || x.value != y.value) return false;
  }
  return true;
}

bool ObservedSet::contains(Index row, Index col) const {
  if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_) return false;
  const auto iu = static_cast<std::size_t>(row);
  const auto begin = missing_cols_.begin() + static_cast<std::ptrdiff_t>(missing_start_[iu]);
  const auto end = missing_cols_.begin() + static_cast<std::ptrdiff_t>(missing_start_[iu + 1]);
  return !std::binary_search(begin, end, col);
}

Coord ObservedSet::at(Index idx) const {
  if (idx < 0 || idx >= size_) throw Error(ErrorCode::OutOfRange, "observed index " + std::to_string(idx));
  // Row: last i with row_offset_[i] <= idx.
  const auto it = std::upper_bound(row_offset_.begin(), row_offset_.end(), idx);
  const auto row = static_cast<Index>(it - row_offset_.begin()) - 1;
  Index local = idx - row_offset_[static_cast<std::size_t>(row)];

  // Walk the sorted missing columns of this row; every missing column at or
  // before the candidate shifts it right by one.
  const auto iu = static_cast<std::size_t>(row);
  Index col = local;
  for (auto k = missing_start_[iu]; k < missing_start_[iu + 1]; ++k) {
    if (missing_cols_[k] <= col) {
      ++col;
    } else {
      break;
    }
  }
  return {row, col};
}

void ObservedSet::for_each(const std::function<void(Coord)>& fn) const {
  for (Index i = 0; i < n_rows_; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    auto k = missing_start_[iu];
    const auto k_end = missing_start_[iu + 1];
    for (Index j = 0; j < n_cols_; ++j) {
      if (k < k_end && missing_cols_[k] == j) {
        ++k;
        continue;
      }
      fn({i, j});
    }
  }
}

std::vector<Coord> ObservedSet::materialize() const {
  std::vector<Coord> out;
  out.reserve(static_cast<std::size_t>(size_));
  for_each([&](Coord c) { out.push_back(c); });
  return out;
}

}  // namespace semtag
