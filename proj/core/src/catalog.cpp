#include "semtag/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "semtag/error.hpp"

namespace semtag {

namespace {

using json = nlohmann::json;

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string clean_token(const std::string& raw) { return std::string(trim(sanitize_utf8(raw))); }

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> string_array(const json& obj, const char* key, std::size_t line_no) {
  std::vector<std::string> out;
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array()) malformed(line_no, std::string("`") + key + "` must be an array of strings");
  for (const auto& v : *it) {
    if (!v.is_string()) malformed(line_no, std::string("`") + key + "` must be an array of strings");
    auto tok = clean_token(v.get<std::string>());
    if (tok.empty()) continue;
    if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(std::move(tok));
  }
  return out;
}

}  // namespace

std::string sanitize_utf8(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  const auto* s = reinterpret_cast<const unsigned char*>(raw.data());
  const std::size_t n = raw.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      if (c >= 0x20 && c != 0x7F) out.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len != 0 && i + len <= n;
    for (std::size_t k = 1; ok && k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (s[i + k] & 0x3F);
      }
    }
    if (ok) {
      const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
      const bool surrogate = cp >= 0xD800 && cp <= 0xDFFF;
      ok = !overlong && !surrogate && cp <= 0x10FFFF;
    }
    if (!ok) {
      out.append(kReplacement);
      ++i;
      continue;
    }
    const bool c1_control = cp >= 0x80 && cp <= 0x9F;
    if (!c1_control) out.append(raw.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> CatalogRecord::feature_names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& [name, kinds] : features) out.push_back(name);
  return out;
}

std::vector<CatalogRecord> parse_catalog(std::istream& in) {
  std::vector<CatalogRecord> records;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string clean = sanitize_utf8(line);
    if (trim(clean).empty()) continue;

    json obj;
    try {
      obj = json::parse(clean);
    } catch (const json::parse_error& e) {
      malformed(line_no, e.what());
    }
    if (!obj.is_object()) malformed(line_no, "expected a JSON object");
    const auto id_it = obj.find("dataset_id");
    if (id_it == obj.end() || !id_it->is_string()) malformed(line_no, "missing string `dataset_id`");

    CatalogRecord rec;
    rec.dataset_id = clean_token(id_it->get<std::string>());
    if (rec.dataset_id.empty()) malformed(line_no, "empty `dataset_id`");
    if (!seen.insert(rec.dataset_id).second) {
      throw Error(ErrorCode::DuplicateDatasetId,
                  "line " + std::to_string(line_no) + ": " + rec.dataset_id);
    }
    rec.tags = string_array(obj, "tags", line_no);
    rec.absent_tags = string_array(obj, "absent_tags", line_no);
    std::erase_if(rec.absent_tags, [&](const std::string& t) {
      return std::find(rec.tags.begin(), rec.tags.end(), t) != rec.tags.end();
    });

    auto add_features = [&](const char* key, FeatureKind kind) {
      for (auto& name : string_array(obj, key, line_no)) {
        auto it = std::find_if(rec.features.begin(), rec.features.end(),
                               [&](const auto& f) { return f.first == name; });
        if (it == rec.features.end()) {
          rec.features.emplace_back(std::move(name), static_cast<std::uint8_t>(kind));
        } else {
          it->second |= static_cast<std::uint8_t>(kind);
        }
      }
    };
    add_features("tables", FeatureKind::Table);
    add_features("files", FeatureKind::File);
    add_features("columns", FeatureKind::Column);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string kind_label(std::uint8_t kinds) {
  std::string out;
  auto add = [&](FeatureKind k, const char* label) {
    if (kinds & static_cast<std::uint8_t>(k)) {
      if (!out.empty()) out += '|';
      out += label;
    }
  };
  add(FeatureKind::Table, "table");
  add(FeatureKind::File, "file");
  add(FeatureKind::Column, "column");
  return out;
}

namespace {

std::uint8_t parse_kind_label(std::string_view label) {
  std::uint8_t kinds = 0;
  std::size_t pos = 0;
  while (pos <= label.size()) {
    const auto bar = label.find('|', pos);
    const auto part = label.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
    if (part == "table") {
      kinds |= static_cast<std::uint8_t>(FeatureKind::Table);
    } else if (part == "file") {
      kinds |= static_cast<std::uint8_t>(FeatureKind::File);
    } else if (part == "column") {
      kinds |= static_cast<std::uint8_t>(FeatureKind::Column);
    } else if (!part.empty()) {
      throw Error(ErrorCode::ParseError, "unknown feature kind `" + std::string(part) + "`");
    }
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  return kinds;
}

}  // namespace

Vocabulary Vocabulary::from_records(std::span<const CatalogRecord> records) {
  std::set<std::string> tags;
  std::map<std::string, std::uint8_t> features;
  for (const auto& r : records) {
    tags.insert(r.tags.begin(), r.tags.end());
    tags.insert(r.absent_tags.begin(), r.absent_tags.end());
    for (const auto& [name, kinds] : r.features) features[name] |= kinds;
  }
  std::vector<FeatureEntry> feats;
  feats.reserve(features.size());
  for (auto& [name, kinds] : features) feats.push_back({name, kinds});
  return from_parts({tags.begin(), tags.end()}, std::move(feats));
}

Vocabulary Vocabulary::from_parts(std::vector<std::string> tags, std::vector<FeatureEntry> features) {
  Vocabulary v;
  std::sort(tags.begin(), tags.end());
  std::sort(features.begin(), features.end(),
            [](const FeatureEntry& a, const FeatureEntry& b) { return a.name < b.name; });
  v.tags_ = std::move(tags);
  v.features_ = std::move(features);
  v.reindex();
  return v;
}

void Vocabulary::reindex() {
  tag_lookup_.clear();
  feature_lookup_.clear();
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!tag_lookup_.emplace(tags_[i], static_cast<Index>(i)).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate tag `" + tags_[i] + "` in vocabulary");
    }
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!feature_lookup_.emplace(features_[i].name, static_cast<Index>(i)).second) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate feature `" + features_[i].name + "` in vocabulary");
    }
  }
}

std::optional<Index> Vocabulary::tag_index(std::string_view tag) const {
  const auto it = tag_lookup_.find(tag);
  if (it == tag_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> Vocabulary::feature_index(std::string_view name) const {
  const auto it = feature_lookup_.find(name);
  if (it == feature_lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::feature_names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::string Vocabulary::to_json() const {
  json j;
  j["tags"] = tags_;
  j["features"] = json::array();
  for (const auto& f : features_) {
    j["features"].push_back({{"name", f.name}, {"kind", kind_label(f.kinds)}});
  }
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    std::vector<std::string> tags = j.at("tags").get<std::vector<std::string>>();
    std::vector<FeatureEntry> feats;
    for (const auto& f : j.at("features")) {
      feats.push_back({f.at("name").get<std::string>(), parse_kind_label(f.at("kind").get<std::string>())});
    }
    return from_parts(std::move(tags), std::move(feats));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("vocabulary manifest: ") + e.what());
  }
}

TernaryMatrix encode(std::span<const CatalogRecord> records, const Vocabulary& vocab) {
  const Index n_tags = vocab.tag_count();
  std::vector<Triplet> triplets;
  std::vector<TernaryValue> tag_state(static_cast<std::size_t>(n_tags));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto row = static_cast<Index>(r);
    const auto& rec = records[r];
    std::fill(tag_state.begin(), tag_state.end(), TernaryValue::Missing);
    for (const auto& t : rec.tags) {
      const auto idx = vocab.tag_index(t);
      if (!idx) throw Error(ErrorCode::UnknownToken, "tag `" + t + "`");
      tag_state[static_cast<std::size_t>(*idx)] = TernaryValue::One;
    }
    for (const auto& t : rec.absent_tags) {
      const auto idx = vocab.tag_index(t);
      if (!idx) throw Error(ErrorCode::UnknownToken, "tag `" + t + "`");
      auto& state = tag_state[static_cast<std::size_t>(*idx)];
      if (state != TernaryValue::One) state = TernaryValue::Zero;
    }
    for (Index j = 0; j < n_tags; ++j) {
      const auto v = tag_state[static_cast<std::size_t>(j)];
      if (v != TernaryValue::Zero) triplets.push_back({row, j, v});
    }
    for (const auto& [name, kinds] : rec.features) {
      const auto idx = vocab.feature_index(name);
      if (!idx) throw Error(ErrorCode::UnknownToken, "feature `" + name + "`");
      triplets.push_back({row, n_tags + *idx, TernaryValue::One});
    }
  }
  return TernaryMatrix::build(static_cast<Index>(records.size()), n_tags, vocab.feature_count(),
                              triplets);
}

DecodedRow decode_row(const TernaryMatrix& m, const Vocabulary& vocab, Index row) {
  if (m.tag_cols() != vocab.tag_count() || m.feature_cols() != vocab.feature_count()) {
    throw Error(ErrorCode::ShapeMismatch, "matrix and vocabulary disagree on column counts");
  }
  DecodedRow out;
  for (const auto& t : m.row_entries(row)) {
    if (t.value != TernaryValue::One) continue;
    if (m.is_tag_col(t.col)) {
      out.tags.push_back(vocab.tag(t.col));
    } else {
      out.features.push_back(vocab.feature(t.col - m.tag_cols()).name);
    }
  }
  return out;
}

PowerLawFit fit_power_law(std::span<const double> ranks, std::span<const double> counts) {
  if (ranks.size() != counts.size()) {
    throw Error(ErrorCode::InvalidArgument, "ranks and counts differ in length");
  }
  if (ranks.size() < 3) throw Error(ErrorCode::TooFewItems, "need at least 3 points");
  const auto n = static_cast<double>(ranks.size());
  std::vector<double> x(ranks.size()), y(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (!(ranks[i] > 0.0) || !(counts[i] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "ranks and counts must be positive");
    }
    x[i] = std::log(ranks[i]);
    y[i] = std::log(counts[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 1e-300)) throw Error(ErrorCode::DegenerateFit, "all ranks are equal");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    ssr += r * r;
  }
  PowerLawFit fit;
  fit.alpha = slope == 0.0 ? 0.0 : -slope;
  fit.std_error = std::sqrt(ssr / (n - 2.0) / sxx);
  return fit;
}

RankFrequency rank_frequency(std::map<std::string, std::int64_t> counts) {
  RankFrequency rf;
  for (auto& [item, c] : counts) {
    if (c > 0) rf.items.emplace_back(item, c);
  }
  if (rf.items.size() < 3) {
    throw Error(ErrorCode::TooFewItems,
                "need at least 3 distinct items, found " + std::to_string(rf.items.size()));
  }
  // counts come out of the map name-ordered, so a stable sort keeps ties by name.
  std::stable_sort(rf.items.begin(), rf.items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<double> ranks(rf.items.size()), freq(rf.items.size());
  for (std::size_t i = 0; i < rf.items.size(); ++i) {
    ranks[i] = static_cast<double>(i + 1);
    freq[i] = static_cast<double>(rf.items[i].second);
  }
  const auto fit = fit_power_law(ranks, freq);
  rf.fitted_exponent = fit.alpha;
  rf.fit_stderr = fit.std_error;
  return rf;
}

RankFrequency rank_frequency(std::span<const CatalogRecord> records, TokenKind kind) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& r : records) {
    if (kind == TokenKind::Tags) {
      for (const auto& t : r.tags) ++counts[t];
    } else {
      for (const auto& [name, kinds] : r.features) ++counts[name];
    }
  }
  return rank_frequency(std::move(counts));
}

void RankFrequency::write_csv(std::ostream& out) const {
  out << "rank,item,count\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i].first;
    const bool quote = item.find_first_of(",\"\n") != std::string::npos;
    out << (i + 1) << ',';
    if (quote) {
      out << '"';
      for (char c : item) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << item;
    }
    out << ',' << items[i].second << '\n';
  }
}

}  // namespace semtag
