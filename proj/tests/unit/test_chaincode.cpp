#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "pbl/envelope.hpp"
#include "pbl/ledger_file.hpp"
#include "pbl/services/providers.hpp"
#include "pbl/tamper.hpp"

using namespace pbl;
using namespace pbl::testing;
using chaincode::BalanceChaincode;

TEST_CASE("balance step") {
  BalanceChaincode b;
  const auto r = b.step(to_bytes("100"), to_bytes("+25"));
  CHECK(to_string(r.output) == "125");
  CHECK(to_string(r.state) == "125");
  CHECK(to_string(b.step(to_bytes("0"), to_bytes("-7")).output) == "-7");
  CHECK(to_string(b.initial_state()) == "0");
}

TEST_CASE("balance amount grammar") {
  CHECK(BalanceChaincode::parse_amount(to_bytes("42")) == 42);
  CHECK(BalanceChaincode::parse_amount(to_bytes("+0")) == 0);
  CHECK(BalanceChaincode::parse_amount(to_bytes("-999999999999999999")) == -999999999999999999LL);
  for (const char* bad : {"", "+", "-", "1.5", "12a", " 1", "++1", "1000000000000000000"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(BalanceChaincode::parse_amount(to_bytes(bad)), chaincode::PayloadError);
  }
}

TEST_CASE("null chaincode and raw transactions output the zero sentinel") {
  chaincode::NullChaincode n;
  const auto r = n.step(to_bytes("s"), to_bytes("anything"));
  CHECK(r.output == zero_output());
  CHECK(r.state == to_bytes("s"));

  const auto a = Actors::make(1);
  const auto registry = chaincode::Registry::with_builtins();
  const auto tx = signed_tx(a, to_bytes("raw data"));
  const auto result = services::execute_and_sign(tx, a.user.public_key(), {}, registry, a.esps[0]);
  REQUIRE(std::holds_alternative<services::Execution>(result));
  const auto& ct = std::get<services::Execution>(result).ct;
  CHECK(ct.output == zero_output());
  CHECK(verify(a.esps[0].public_key(), execution_signing_bytes(ct.inner, ct.output), ct.executing_signature));
}

TEST_CASE("execute advances the context") {
  const auto a = Actors::make(2);
  const auto reg = chaincode::Registry::with_builtins();
  const auto& bal = *reg.find("balance");
  chaincode::ExecutionContext ctx{a.address, {}};
  CHECK(to_string(chaincode::execute(bal, ctx, signed_tx(a, to_bytes("+100"), std::string("balance")))) == "100");
  CHECK(to_string(chaincode::execute(bal, ctx, signed_tx(a, to_bytes("+25"), std::string("balance")))) == "125");
  CHECK(to_string(ctx.state_for(bal)) == "125");
  CHECK_THROWS_AS(chaincode::execute(bal, ctx, signed_tx(a, to_bytes("x"), std::string("balance"))),
                  chaincode::PayloadError);
  CHECK_THROWS_AS(chaincode::execute(bal, ctx, signed_tx(a, to_bytes("1"), std::string("null"))),
                  std::invalid_argument);
  CHECK(reg.find("missing") == nullptr);

  // Enveloped payloads run on the body.
  PayloadEnvelope env{{Digest::zero()}, to_bytes("+5")};
  CHECK(to_string(chaincode::execute(bal, ctx, signed_tx(a, encode_envelope(env), std::string("balance")))) == "130");
}

TEST_CASE("ten balance transactions summing to 360") {
  const auto a = Actors::make(3);
  const std::vector<std::int64_t> amounts{10, 20, 30, 40, 50, 60, 70, 80, -40, 40};
  std::vector<std::string> payloads;
  for (auto v : amounts) payloads.push_back(std::to_string(v));
  const auto expected = oracle_running_totals(payloads).back();
  REQUIRE(expected == 360);
  const auto l = balance_ledger(a, amounts, 3);
  const auto r = chaincode::replay(BalanceChaincode{}, l);
  CHECK(to_string(r.final_state) == "360");
  CHECK(r.mismatches.empty());
  CHECK(r.transactions == 10);
}

TEST_CASE("forged output is localized") {
  const auto a = fixture_actors();
  const auto l = parse_ledger_file(read_file(fixture_dir() / "balance50.pbl"));
  const CollusionSigners s{a.gba, a.esps[1], a.osp, a.vsp, a.user};
  const auto forged = rewrite_from_block(l, 4, [](auto& txs) { txs[2].output = to_bytes("999999"); }, s);
  const auto r = chaincode::replay(BalanceChaincode{}, forged);
  REQUIRE(r.mismatches.size() == 1);
  CHECK(r.mismatches[0].block_index == 4);
  CHECK(r.mismatches[0].tx_index == 2);
  CHECK(to_string(r.mismatches[0].stored) == "999999");
  CHECK(r.mismatches[0].recomputed == l.blocks[3].transactions[2].output);
  // The fold continues on recomputed state, so the final total is unaffected.
  CHECK(r.final_state == chaincode::replay(BalanceChaincode{}, l).final_state);
}

TEST_CASE("genesis-only ledger replays to the initial state") {
  const auto r = chaincode::replay(BalanceChaincode{}, genesis_only(Actors::make(4)));
  CHECK(to_string(r.final_state) == "0");
  CHECK(r.mismatches.empty());
  CHECK(r.transactions == 0);
}

TEST_CASE("payload envelopes") {
  PayloadEnvelope env{{sha256(to_bytes("a")), sha256(to_bytes("b"))}, to_bytes("body")};
  const auto wire = encode_envelope(env);
  CHECK(to_string(ByteView(wire).first(4)) == "PBLE");
  CHECK(parse_envelope(wire) == env);
  CHECK(parse_envelope(to_bytes("plain")) == PayloadEnvelope{{}, to_bytes("plain")});
  CHECK_THROWS_AS(parse_envelope(to_bytes("PBLE\x01")), DecodeError);
}

TEST_CASE("dependency order") {
  const auto a = Actors::make(5);
  const auto first = executed(a, signed_tx(a, to_bytes("producer")));
  const auto consumer =
      executed(a, signed_tx(a, encode_envelope({{output_id(first)}, to_bytes("consumer")})));
  const auto orphan =
      executed(a, signed_tx(a, encode_envelope({{sha256(to_bytes("nowhere"))}, to_bytes("orphan")})));

  CHECK_FALSE(find_dependency_violation(std::vector{first, consumer}, {}));
  const auto v = find_dependency_violation(std::vector{consumer, first}, {});
  REQUIRE(v);
  CHECK(v->tx_index == 0);
  CHECK(v->appears_later);
  CHECK_FALSE(find_dependency_violation(std::vector{consumer}, {output_id(first)}));
  const auto u = find_dependency_violation(std::vector{orphan}, {});
  REQUIRE(u);
  CHECK_FALSE(u->appears_later);

  const auto sorted = dependency_sort({consumer, orphan, first});
  CHECK(sorted == std::vector{orphan, first, consumer});
}
