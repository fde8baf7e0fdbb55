#include "doctest.h"
#include "fixtures.hpp"
#include "pbl/ledger_file.hpp"

using namespace pbl;
using namespace pbl::testing;

TEST_CASE("committed fixtures match a fresh rebuild") {
  for (const auto& [name, bytes] : build_fixtures()) {
    CAPTURE(name);
    CHECK(read_file(fixture_dir() / name) == bytes);
  }
}

TEST_CASE("fixture shapes") {
  const auto l = parse_ledger_file(read_file(fixture_dir() / "ledger20.pbl"));
  CHECK(l.blocks.size() == kFixtureDataBlocks);
  CHECK(validate_ledger(l, KeyDirectory::from_genesis(l.genesis)).ok());
  const auto b = parse_ledger_file(read_file(fixture_dir() / "balance50.pbl"));
  std::size_t txs = 0;
  for (const auto& blk : b.blocks) txs += blk.transactions.size();
  CHECK(txs == kBalanceTransactions);
  CHECK(validate_ledger(b, KeyDirectory::from_genesis(b.genesis)).ok());
  const auto t = parse_ledger_file(read_file(fixture_dir() / "ledger20-tampered.pbl"));
  CHECK_FALSE(validate_ledger(t, KeyDirectory::from_genesis(t.genesis)).ok());
}
