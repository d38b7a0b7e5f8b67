#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace semtag {

using Index = std::int64_t;
using DenseMatrix = Eigen::MatrixXd;

enum class TernaryValue : std::uint8_t { Zero = 0, One = 1, Missing = 2 };

char to_char(TernaryValue v) noexcept;

struct Coord {
  Index row = 0;
  Index col = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

struct Triplet {
  Index row = 0;
  Index col = 0;
  TernaryValue value = TernaryValue::Zero;
};

class ObservedSet;

/// Sparse data matrix over {0, 1, ?} whose columns are split into a tag block
/// [0, n_tag_cols) followed by a feature block. Zero is the implicit default;
/// only One and Missing entries are stored, in row-major order. Missing may
/// only appear in the tag block.
class TernaryMatrix {
 public:
  TernaryMatrix() = default;

  /// Zero-valued triplets are accepted and dropped. Throws OutOfRange,
  /// MissingInFeatureBlock or DuplicateCoordinate.
  static TernaryMatrix build(Index n_rows, Index n_tag_cols, Index n_feat_cols,
                             std::span<const Triplet> triplets);

  Index rows() const noexcept { return n_rows_; }
  Index tag_cols() const noexcept { return n_tag_cols_; }
  Index feature_cols() const noexcept { return n_feat_cols_; }
  Index cols() const noexcept { return n_tag_cols_ + n_feat_cols_; }
  bool is_tag_col(Index col) const noexcept { return col < n_tag_cols_; }

  TernaryValue at(Index row, Index col) const;

  /// Stored (One or Missing) entries in row-major order.
  std::span<const Triplet> entries() const noexcept { return entries_; }
  /// Stored entries of one row, sorted by column.
  std::span<const Triplet> row_entries(Index row) const;

  Index missing_count() const noexcept { return n_missing_; }

  ObservedSet observed_set() const;

  /// Dense copy with One -> 1, Zero -> 0, Missing -> fill. Throws FillOutOfRange.
  DenseMatrix impute(double fill) const;
  /// Same values with Zero left implicit.
  Eigen::SparseMatrix<double> impute_sparse(double fill) const;

  /// Appends `n_new` all-Missing columns at the end of the tag block.
  TernaryMatrix with_extra_tag_cols(Index n_new) const;

  /// Text format: header `m n_t n_f`, then `row col v` lines with v in {1, ?}.
  void write(std::ostream& out) const;
  static TernaryMatrix read(std::istream& in);

  friend bool operator==(const TernaryMatrix& a, const TernaryMatrix& b);

 private:
  Index n_rows_ = 0;
  Index n_tag_cols_ = 0;
  Index n_feat_cols_ = 0;
  Index n_missing_ = 0;
  std::vector<Triplet> entries_;
  std::vector<std::size_t> row_start_;  // size n_rows_ + 1
};

/// The coordinates of all non-Missing cells. Kept implicit: the feature block
/// is always fully observed, so only the Missing tag cells are recorded. This
/// keeps catalog-scale matrices (tens of thousands of rows, hundreds of
/// thousands of columns) cheap while still supporting uniform index lookup.
class ObservedSet {
 public:
  ObservedSet() = default;

  Index size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool contains(Index row, Index col) const;

  /// The idx-th observed coordinate in row-major order, idx in [0, size()).
  Coord at(Index idx) const;

  /// Visits every coordinate in row-major order.
  void for_each(const std::function<void(Coord)>& fn) const;

  std::vector<Coord> materialize() const;

 private:
  friend class TernaryMatrix;

  Index n_rows_ = 0;
  Index n_cols_ = 0;
  Index size_ = 0;
  std::vector<Index> row_offset_;        // observed cells before row i
  std::vector<Index> missing_cols_;      // CSR column indices, sorted per row
  std::vector<std::size_t> missing_start_;
};

}  // namespace semtag
