#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semtag/ternary_matrix.hpp"

namespace semtag {

/// Where a feature name was seen. A name may carry several kinds.
enum class FeatureKind : std::uint8_t { Table = 1, File = 2, Column = 4 };

struct CatalogRecord {
  std::string dataset_id;
  std::vector<std::string> tags;
  /// Features in first-seen order with the kinds each was declared under.
  std::vector<std::pair<std::string, std::uint8_t>> features;
  /// Tags the curator affirms are absent (encoded as explicit Zero).
  std::vector<std::string> absent_tags;

  std::vector<std::string> feature_names() const;
};

/// Reads JSON Lines catalogs. Each line is an object with `dataset_id`, and
/// optional string arrays `tags`, `files`, `columns`, `tables`, `absent_tags`.
/// Undecodable bytes become U+FFFD and control characters are dropped; tokens
/// are whitespace-trimmed, deduplicated and otherwise kept verbatim.
/// Throws MalformedLine (message names the line) or DuplicateDatasetId.
std::vector<CatalogRecord> parse_catalog(std::istream& in);

/// Replaces invalid UTF-8 sequences with U+FFFD and removes C0/DEL control bytes.
std::string sanitize_utf8(std::string_view raw);

struct FeatureEntry {
  std::string name;
  std::uint8_t kinds = 0;
};

std::string kind_label(std::uint8_t kinds);

/// Bijective token <-> column maps. Indices are assigned in lexicographic
/// (byte) order so two runs over the same catalog agree.
class Vocabulary {
 public:
  static Vocabulary from_records(std::span<const CatalogRecord> records);
  static Vocabulary from_parts(std::vector<std::string> tags, std::vector<FeatureEntry> features);

  Index tag_count() const noexcept { return static_cast<Index>(tags_.size()); }
  Index feature_count() const noexcept { return static_cast<Index>(features_.size()); }

  std::optional<Index> tag_index(std::string_view tag) const;
  std::optional<Index> feature_index(std::string_view name) const;

  const std::string& tag(Index i) const { return tags_.at(static_cast<std::size_t>(i)); }
  const FeatureEntry& feature(Index i) const { return features_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  const std::vector<FeatureEntry>& features() const noexcept { return features_; }
  std::vector<std::string> feature_names() const;

  /// `{"tags":[...],"features":[{"name":...,"kind":...}]}`
  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);

 private:
  std::vector<std::string> tags_;
  std::vector<FeatureEntry> features_;
  std::map<std::string, Index, std::less<>> tag_lookup_;
  std::map<std::string, Index, std::less<>> feature_lookup_;

  void reindex();
};

/// One row per record. Declared tag -> One, affirmed-absent tag -> Zero, any
/// other tag -> Missing; declared feature -> One, otherwise Zero.
/// Throws UnknownToken.
TernaryMatrix encode(std::span<const CatalogRecord> records, const Vocabulary& vocab);

struct DecodedRow {
  std::vector<std::string> tags;
  std::vector<std::string> features;
};

/// Inverse of encode for one row: One cells become tokens, Missing is treated
/// as undeclared. Tokens come back in vocabulary order.
DecodedRow decode_row(const TernaryMatrix& m, const Vocabulary& vocab, Index row);

enum class TokenKind { Tags, Features };

struct PowerLawFit {
  double alpha = 0.0;
  double std_error = 0.0;
};

/// OLS of log(count) on log(rank); alpha is the negated slope and the error
/// is the usual standard error of the slope. Throws DegenerateFit when the
/// ranks carry no spread, InvalidArgument on bad input.
PowerLawFit fit_power_law(std::span<const double> ranks, std::span<const double> counts);

struct RankFrequency {
  std::vector<std::pair<std::string, std::int64_t>> items;  // descending count, ties by name
  double fitted_exponent = 0.0;
  double fit_stderr = 0.0;

  /// CSV `rank,item,count` with header.
  void write_csv(std::ostream& out) const;
};

/// Counts how many records mention each token. Throws TooFewItems when fewer
/// than three distinct tokens occur.
RankFrequency rank_frequency(std::span<const CatalogRecord> records, TokenKind kind);

/// Same fit over an explicit token -> count table.
RankFrequency rank_frequency(std::map<std::string, std::int64_t> counts);

}  // namespace semtag
