#pragma once

#include <string>
#include <vector>

#include "semtag/ternary_matrix.hpp"

namespace fixture {

inline const std::string kDataDir = SEMTAG_TEST_DATA_DIR;

// Column order matches what the catalog encoder produces (byte-sorted names).
inline const std::vector<std::string> kToyTags = {"account", "transaction"};
inline const std::vector<std::string> kToyFeatures = {"ACCOUNTS", "ACCT_BAL", "ACCT_ID", "AMOUNT", "DATE",
                                                      "FIRST",    "LAST",     "PAYEE",   "TXNS"};

// The three-system banking example: A tagged account, B tagged transaction,
// C untagged. Built by hand so it does not depend on the catalog code.
inline semtag::TernaryMatrix toy_matrix() {
  using semtag::TernaryValue;
  constexpr auto one = TernaryValue::One;
  constexpr auto miss = TernaryValue::Missing;
  enum { account, transaction, ACCOUNTS, ACCT_BAL, ACCT_ID, AMOUNT, DATE, FIRST, LAST, PAYEE, TXNS };
  std::vector<semtag::Triplet> t;
  auto row = [&](semtag::Index r, std::vector<std::pair<int, TernaryValue>> cells) {
    for (auto [c, v] : cells) t.push_back({r, c, v});
  };
  row(0, {{account, one}, {transaction, miss}, {ACCOUNTS, one}, {ACCT_BAL, one}, {ACCT_ID, one},
          {DATE, one}, {FIRST, one}, {LAST, one}});
  row(1, {{account, miss}, {transaction, one}, {TXNS, one}, {ACCT_BAL, one}, {ACCT_ID, one},
          {DATE, one}, {PAYEE, one}, {AMOUNT, one}});
  row(2, {{account, miss}, {transaction, miss}, {ACCT_BAL, one}, {DATE, one}, {FIRST, one},
          {LAST, one}, {AMOUNT, one}, {PAYEE, one}});
  return semtag::TernaryMatrix::build(3, 2, 9, t);
}

inline constexpr int kAcctId = 2 + 2;  // column of ACCT_ID inside the full matrix

}  // namespace fixture
