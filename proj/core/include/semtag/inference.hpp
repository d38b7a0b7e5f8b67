#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "semtag/catalog.hpp"
#include "semtag/factorization.hpp"
#include "semtag/ternary_matrix.hpp"

namespace semtag {

/// 1 / (1 + exp(-(2b - 1))). Odds of 0.5 map to probability 0.5.
double presence_probability(double odds);

struct ProbabilityMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_names;

  /// Header `dataset_id,<names...>`, one row per dataset.
  void write_csv(std::ostream& out) const;
};

/// presence_probability applied to X'Y_t. Names are left empty.
ProbabilityMatrix tag_probabilities(const Factorization& f);
/// presence_probability applied to X'Y_f.
ProbabilityMatrix feature_probabilities(const Factorization& f);

struct TopicReport {
  std::string anchor_tag;
  std::vector<std::pair<std::string, double>> top_features;     // descending
  std::vector<std::pair<std::string, double>> bottom_features;  // ascending
  std::vector<std::pair<std::string, double>> cooccurring_tags; // by |w| descending

  std::string to_json() const;
  void write_text(std::ostream& out) const;
};

/// Reads row `topic` of Y. Ties are broken by name. Throws TopicOutOfRange,
/// ShapeMismatch when the vocabulary disagrees with f, InvalidArgument when
/// there are fewer than five features.
TopicReport topic_report(const Factorization& f, Index topic, const Vocabulary& vocab);
/// Same, with names given in column order.
TopicReport topic_report(const Factorization& f, Index topic, const std::vector<std::string>& tag_names,
                         const std::vector<std::string>& feature_names);

struct MonosemyProfile {
  std::vector<std::string> tags;
  std::vector<std::int64_t> n_semy;
};

/// Column sums of 1[|Y_t| >= threshold]. Throws InvalidArgument if threshold <= 0.
MonosemyProfile monosemy_profile(const Factorization& f, double threshold = 0.5,
                                 const std::vector<std::string>& tag_names = {});

/// A with n_new_tags all-Missing tag columns appended; Omega is unchanged.
/// Throws InvalidArgument if n_new_tags < 1.
TernaryMatrix augment_hypothetical(const TernaryMatrix& A, Index n_new_tags);

}  // namespace semtag
