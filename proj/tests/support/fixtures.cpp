#include "fixtures.hpp"

#include "pbl/ledger_file.hpp"

namespace pbl::testing {

Actors fixture_actors() { return Actors::make(2020); }

Ledger fixture_ledger20() {
  std::mt19937_64 rng(20);
  return random_ledger(fixture_actors(), kFixtureDataBlocks, rng);
}

Ledger fixture_ledger20_tampered() {
  auto l = fixture_ledger20();
  l.blocks.at(kTamperedBlock - 1).transactions.at(0).inner.payload.at(0) ^= 0x01;
  return l;
}

std::vector<std::int64_t> fixture_balance_amounts() {
  std::mt19937_64 rng(50);
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < kBalanceTransactions; ++i) {
    out.push_back(static_cast<std::int64_t>(uniform_below(rng, 2001)) - 1000);
  }
  return out;
}

Ledger fixture_balance50() { return balance_ledger(fixture_actors(), fixture_balance_amounts(), 5); }

Ledger fixture_ledger5() {
  std::mt19937_64 rng(5);
  return random_ledger(fixture_actors(), 4, rng);
}

std::map<std::string, Bytes> build_fixtures() {
  std::map<std::string, Bytes> out;
  out["ledger20.pbl"] = serialize_ledger_file(fixture_ledger20());
  out["ledger20-tampered.pbl"] = serialize_ledger_file(fixture_ledger20_tampered());
  out["balance50.pbl"] = serialize_ledger_file(fixture_balance50());
  out["ledger5.pbl"] = serialize_ledger_file(fixture_ledger5());
  return out;
}

}  // namespace pbl::testing
