#include "semtag/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "semtag/error.hpp"

namespace semtag {

double presence_probability(double odds) {
  const double z = 2.0 * odds - 1.0;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

ProbabilityMatrix probabilities(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  ProbabilityMatrix p;
  p.values = (X.transpose() * Y).unaryExpr([](double b) { return presence_probability(b); });
  return p;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using Weighted = std::pair<std::string, double>;

nlohmann::json pairs_json(const std::vector<Weighted>& items) {
  auto arr = nlohmann::json::array();
  for (const auto& [name, w] : items) arr.push_back({{"name", name}, {"weight", w}});
  return arr;
}

}  // namespace

void ProbabilityMatrix::write_csv(std::ostream& out) const {
  out << "dataset_id";
  for (Index j = 0; j < values.cols(); ++j) {
    out << ',' << csv_field(j < static_cast<Index>(col_names.size()) ? col_names[j] : "col" + std::to_string(j));
  }
  out << '\n';
  out << std::setprecision(10);
  for (Index i = 0; i < values.rows(); ++i) {
    out << csv_field(i < static_cast<Index>(row_ids.size()) ? row_ids[i] : std::to_string(i));
    for (Index j = 0; j < values.cols(); ++j) out << ',' << values(i, j);
    out << '\n';
  }
}

ProbabilityMatrix tag_probabilities(const Factorization& f) { return probabilities(f.X, f.Y_t); }

ProbabilityMatrix feature_probabilities(const Factorization& f) { return probabilities(f.X, f.Y_f); }

std::string TopicReport::to_json() const {
  nlohmann::json j;
  j["anchor_tag"] = anchor_tag;
  j["top_features"] = pairs_json(top_features);
  j["bottom_features"] = pairs_json(bottom_features);
  j["cooccurring_tags"] = pairs_json(cooccurring_tags);
  return j.dump(2);
}

void TopicReport::write_text(std::ostream& out) const {
  std::size_t width = 8;
  for (const auto* list : {&top_features, &bottom_features, &cooccurring_tags}) {
    for (const auto& [name, w] : *list) width = std::max(width, name.size());
  }
  auto section = [&](const char* title, const std::vector<Weighted>& items) {
    out << title << '\n';
    if (items.empty()) out << "  (none)\n";
    for (const auto& [name, w] : items) {
      out << "  " << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right
          << std::fixed << std::setprecision(4) << std::setw(9) << w << '\n';
    }
    out.unsetf(std::ios::floatfield);
  };
  out << "topic: " << anchor_tag << '\n';
  section("top features", top_features);
  section("bottom features", bottom_features);
  section("co-occurring tags", cooccurring_tags);
}

TopicReport topic_report(const Factorization& f, Index topic, const Vocabulary& vocab) {
  return topic_report(f, topic, vocab.tags(), vocab.feature_names());
}

TopicReport topic_report(const Factorization& f, Index topic, const std::vector<std::string>& tag_names,
                         const std::vector<std::string>& feature_names) {
  if (topic < 0 || topic >= f.rank()) {
    throw Error(ErrorCode::TopicOutOfRange,
                "topic " + std::to_string(topic) + " not in [0, " + std::to_string(f.rank()) + ")");
  }
  if (static_cast<Index>(tag_names.size()) != f.tag_cols() ||
      static_cast<Index>(feature_names.size()) != f.feature_cols()) {
    throw Error(ErrorCode::ShapeMismatch, "names do not match the factorization");
  }
  if (f.feature_cols() < 5) {
    throw Error(ErrorCode::InvalidArgument, "topic reports need at least 5 features");
  }

  std::vector<Weighted> features;
  features.reserve(static_cast<std::size_t>(f.feature_cols()));
  for (Index j = 0; j < f.feature_cols(); ++j) features.emplace_back(feature_names[static_cast<std::size_t>(j)], f.Y_f(topic, j));

  TopicReport r;
  // Anchored topics are named after their tag; extra topics keep a number.
  r.anchor_tag = topic < f.tag_cols() ? tag_names[static_cast<std::size_t>(topic)] : "topic" + std::to_string(topic);

  std::vector<Weighted> desc = features;
  std::stable_sort(desc.begin(), desc.end(), [](const Weighted& a, const Weighted& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  r.top_features.assign(desc.begin(), desc.begin() + 5);

  std::vector<Weighted> asc = std::move(features);
  std::stable_sort(asc.begin(), asc.end(), [](const Weighted& a, const Weighted& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  r.bottom_features.assign(asc.begin(), asc.begin() + 5);

  for (Index j = 0; j < f.tag_cols(); ++j) {
    if (j == topic) continue;
    const double w = f.Y_t(topic, j);
    if (std::abs(w) > 0.0) r.cooccurring_tags.emplace_back(tag_names[static_cast<std::size_t>(j)], w);
  }
  std::stable_sort(r.cooccurring_tags.begin(), r.cooccurring_tags.end(),
                   [](const Weighted& a, const Weighted& b) {
                     const double ma = std::abs(a.second);
                     const double mb = std::abs(b.second);
                     return ma != mb ? ma > mb : a.first < b.first;
                   });
  return r;
}

MonosemyProfile monosemy_profile(const Factorization& f, double threshold,
                                 const std::vector<std::string>& tag_names) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
  if (!tag_names.empty() && static_cast<Index>(tag_names.size()) != f.tag_cols()) {
    throw Error(ErrorCode::ShapeMismatch, "tag name count differs from tag block width");
  }
  MonosemyProfile p;
  for (Index j = 0; j < f.tag_cols(); ++j) {
    p.tags.push_back(tag_names.empty() ? std::to_string(j) : tag_names[static_cast<std::size_t>(j)]);
    p.n_semy.push_back((f.Y_t.col(j).array().abs() >= threshold).count());
  }
  return p;
}

TernaryMatrix augment_hypothetical(const TernaryMatrix& A, Index n_new_tags) {
  if (n_new_tags < 1) throw Error(ErrorCode::InvalidArgument, "need at least one new tag column");
  return A.with_extra_tag_cols(n_new_tags);
}

}  // namespace semtag
