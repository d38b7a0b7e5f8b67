#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "semtag/catalog.hpp"
#include "semtag/error.hpp"

using namespace semtag;

namespace {

std::vector<CatalogRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_catalog(in);
}

// Plain least squares slope of log count on log rank, written out longhand.
double ols_alpha(const std::vector<double>& counts) {
  const double n = static_cast<double>(counts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double x = std::log(static_cast<double>(i + 1));
    const double y = std::log(counts[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("parses catalog lines") {
  const auto recs = parse(
      R"({"dataset_id":"okc35fjh/pearson","tags":["education"],"files":["pearson.xlsx"],"columns":[]})"
      "\n"
      R"({"dataset_id":"nltkdata/wordnet","tags":[],"files":[],"columns":[]})"
      "\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].tags == std::vector<std::string>{"education"});
  REQUIRE(recs[0].features.size() == 1);
  CHECK(recs[0].features[0].first == "pearson.xlsx");
  CHECK(recs[0].features[0].second == static_cast<std::uint8_t>(FeatureKind::File));
  CHECK(recs[1].tags.empty());
  CHECK(recs[1].features.empty());
  CHECK(parse("").empty());
  CHECK(parse("\n   \n").empty());
}

TEST_CASE("tokens are trimmed, deduplicated and kinds merged") {
  const auto recs = parse(R"({"dataset_id":" a ","tags":[" x","x "],"files":["f"],"columns":["f","g"]})");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].dataset_id == "a");
  CHECK(recs[0].tags == std::vector<std::string>{"x"});
  REQUIRE(recs[0].features.size() == 2);
  CHECK(kind_label(recs[0].features[0].second) == "file|column");
  CHECK(kind_label(recs[0].features[1].second) == "column");
}

TEST_CASE("malformed lines name the line number") {
  for (const std::string text : {"{\"dataset_id\":\"a\"}\n{not json}\n", "{\"dataset_id\":\"a\"}\n[1,2]\n",
                                 "{\"dataset_id\":\"a\"}\n{\"tags\":[]}\n",
                                 "{\"dataset_id\":\"a\"}\n{\"dataset_id\":\"b\",\"tags\":[1]}\n"}) {
    try {
      parse(text);
      FAIL("expected MalformedLine");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedLine);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  try {
    parse("{\"dataset_id\":\"a\"}\n{\"dataset_id\":\"a\"}\n");
    FAIL("expected DuplicateDatasetId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateDatasetId);
  }
}

TEST_CASE("invalid bytes are replaced and control characters dropped") {
  CHECK(sanitize_utf8("ab\xff" "c") == "ab\xEF\xBF\xBD" "c");
  CHECK(sanitize_utf8("a\x01" "b\x7f") == "ab");
  CHECK(sanitize_utf8("caf\xC3\xA9") == "caf\xC3\xA9");
  CHECK(sanitize_utf8("\xC2\x85x") == "x");  // C1 control
  const auto recs = parse("{\"dataset_id\":\"d\",\"tags\":[\"t\x01" "ag\"]}");
  CHECK(recs[0].tags == std::vector<std::string>{"tag"});
}

TEST_CASE("toy catalog encodes to the banking matrix") {
  std::ifstream in(fixture::kDataDir + "/toy_catalog.jsonl");
  REQUIRE(in);
  const auto recs = parse_catalog(in);
  const auto vocab = Vocabulary::from_records(recs);
  CHECK(vocab.tags() == fixture::kToyTags);
  CHECK(vocab.feature_names() == fixture::kToyFeatures);
  const auto A = encode(recs, vocab);
  CHECK(A == fixture::toy_matrix());
  CHECK(A.observed_set().size() == 29);
  CHECK(A.at(2, 0) == TernaryValue::Missing);
  CHECK(A.at(2, 1) == TernaryValue::Missing);
  CHECK(A.at(2, 2 + 1) == TernaryValue::One);   // ACCT_BAL
  CHECK(A.at(2, 2 + 0) == TernaryValue::Zero);  // ACCOUNTS

  const auto row = decode_row(A, vocab, 0);
  CHECK(row.tags == std::vector<std::string>{"account"});
  CHECK(row.features == std::vector<std::string>{"ACCOUNTS", "ACCT_BAL", "ACCT_ID", "DATE", "FIRST", "LAST"});
  CHECK(kind_label(vocab.feature(*vocab.feature_index("ACCOUNTS")).kinds) == "table");
}

TEST_CASE("encode edge rows") {
  const auto recs = parse(
      R"({"dataset_id":"full","tags":["a","b"],"columns":["x","y"]})"
      "\n"
      R"({"dataset_id":"empty"})"
      "\n"
      R"({"dataset_id":"denied","absent_tags":["a"],"columns":["x"]})"
      "\n");
  const auto vocab = Vocabulary::from_records(recs);
  const auto A = encode(recs, vocab);
  for (Index j = 0; j < 4; ++j) CHECK(A.at(0, j) == TernaryValue::One);
  CHECK(A.at(1, 0) == TernaryValue::Missing);
  CHECK(A.at(1, 1) == TernaryValue::Missing);
  CHECK(A.at(1, 2) == TernaryValue::Zero);
  CHECK(A.at(1, 3) == TernaryValue::Zero);
  CHECK(A.at(2, 0) == TernaryValue::Zero);
  CHECK(A.at(2, 1) == TernaryValue::Missing);

  const auto other = Vocabulary::from_parts({"a"}, {{"x", 4}});
  try {
    encode(recs, other);
    FAIL("expected UnknownToken");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownToken);
  }
}

TEST_CASE("vocabulary json round trip") {
  std::ifstream in(fixture::kDataDir + "/toy_catalog.jsonl");
  const auto recs = parse_catalog(in);
  const auto vocab = Vocabulary::from_records(recs);
  const auto back = Vocabulary::from_json(vocab.to_json());
  CHECK(back.tags() == vocab.tags());
  CHECK(back.feature_names() == vocab.feature_names());
  for (Index i = 0; i < vocab.feature_count(); ++i) CHECK(back.feature(i).kinds == vocab.feature(i).kinds);
  CHECK_THROWS_AS(Vocabulary::from_json("{"), Error);
}

TEST_CASE("power law fits") {
  std::vector<double> ranks{1, 2, 3, 4};
  std::vector<double> counts{8, 4, 2, 1};
  const auto f = fit_power_law(ranks, counts);
  CHECK(f.alpha == doctest::Approx(ols_alpha(counts)).epsilon(1e-12));
  CHECK(f.alpha == doctest::Approx(1.45902196).epsilon(1e-7));

  std::vector<double> r2, c2;
  for (int r = 1; r <= 50; ++r) {
    r2.push_back(r);
    c2.push_back(1e6 * std::pow(r, -2.0));
  }
  const auto exact = fit_power_law(r2, c2);
  CHECK(exact.alpha == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(exact.std_error < 1e-10);

  std::vector<double> flat{5, 5, 5};
  std::vector<double> r3{1, 2, 3};
  CHECK(fit_power_law(r3, flat).alpha == 0.0);

  std::vector<double> two{1, 2};
  CHECK_THROWS_AS(fit_power_law(two, two), Error);
  std::vector<double> same_rank{1, 1, 1};
  try {
    fit_power_law(same_rank, r3);
    FAIL("expected DegenerateFit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFit);
  }
}

TEST_CASE("standard error matches the textbook formula") {
  std::vector<double> ranks{1, 2, 3, 4, 5, 6};
  std::vector<double> counts{40, 22, 11, 9, 4, 4};
  const auto f = fit_power_law(ranks, counts);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    mx += std::log(ranks[i]) / 6;
    my += std::log(counts[i]) / 6;
  }
  double sxx = 0, ssr = 0;
  for (std::size_t i = 0; i < 6; ++i) sxx += std::pow(std::log(ranks[i]) - mx, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    const double pred = my - f.alpha * (std::log(ranks[i]) - mx);
    ssr += std::pow(std::log(counts[i]) - pred, 2);
  }
  CHECK(f.std_error == doctest::Approx(std::sqrt(ssr / 4 / sxx)).epsilon(1e-10));
}

TEST_CASE("rank frequency orders by count then name") {
  const auto recs = parse(
      R"({"dataset_id":"1","tags":["b","a","c"]})"
      "\n"
      R"({"dataset_id":"2","tags":["c","a"]})"
      "\n"
      R"({"dataset_id":"3","tags":["c","d"]})"
      "\n");
  const auto rf = rank_frequency(recs, TokenKind::Tags);
  REQUIRE(rf.items.size() == 4);
  CHECK(rf.items[0] == std::pair<std::string, std::int64_t>{"c", 3});
  CHECK(rf.items[1] == std::pair<std::string, std::int64_t>{"a", 2});
  CHECK(rf.items[2] == std::pair<std::string, std::int64_t>{"b", 1});
  CHECK(rf.items[3] == std::pair<std::string, std::int64_t>{"d", 1});
  std::ostringstream csv;
  rf.write_csv(csv);
  CHECK(csv.str().rfind("rank,item,count\n1,c,3\n2,a,2\n", 0) == 0);

  try {
    rank_frequency(recs, TokenKind::Features);
    FAIL("expected TooFewItems");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewItems);
  }
}

TEST_CASE("zipf sample with unit exponent") {
  const auto counts = oracle::zipf_counts(1000, 1.0, 100000, 3);
  const auto rf = rank_frequency(counts);
  CHECK(rf.fitted_exponent >= 0.9);
  CHECK(rf.fitted_exponent <= 1.1);
}
