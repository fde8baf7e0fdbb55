#pragma once

// Deterministic builders for the committed fixtures under tests/fixtures.
// pbl_mkfixtures writes them; test_fixtures checks the committed bytes still
// match.

#include <map>
#include <string>

#include "support.hpp"

namespace pbl::testing {

inline constexpr std::size_t kFixtureDataBlocks = 20;
inline constexpr std::size_t kTamperedBlock = 7;
inline constexpr std::size_t kBalanceTransactions = 50;
inline constexpr const char* kFixturePhrase =
    "abandon ability able about above absent absorb abstract absurd abuse access accident";

Actors fixture_actors();
Ledger fixture_ledger20();
/// fixture_ledger20 with one payload byte of block kTamperedBlock flipped.
Ledger fixture_ledger20_tampered();
std::vector<std::int64_t> fixture_balance_amounts();
Ledger fixture_balance50();
/// Ledger with a 5-block shape used by connection checks.
Ledger fixture_ledger5();

/// file name -> bytes for every committed fixture.
std::map<std::string, Bytes> build_fixtures();

}  // namespace pbl::testing
