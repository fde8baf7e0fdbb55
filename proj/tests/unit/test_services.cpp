#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "pbl/envelope.hpp"
#include "pbl/services/matrix.hpp"
#include "pbl/services/world.hpp"

using namespace pbl;
using namespace pbl::testing;
using namespace pbl::services;

namespace {

SeedPhrase phrase(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return generate_seed_phrase(12, rng);
}

KeyDirectory audit_keys(LedgerApi& api, const Ledger& l) { return ledger_directory(l, api.fetch_root_record()); }

RoundOpen round_for(const Actors& a, const Ledger& l) {
  RoundOpen r;
  r.ledger_address = a.address;
  r.user_key = a.user.public_key();
  r.vsp_id = "vsp";
  r.tip_chain_hash = l.blocks.empty() ? chain_hash(l.genesis) : chain_hash(l.blocks.back());
  r.tip_height = l.tip_height();
  r.keys = grants_from_directory(KeyDirectory::from_genesis(l.genesis));
  return r;
}

}  // namespace

// ---------------------------------------------------------------- GBA

TEST_CASE("genesis with an empty config gets the user key inserted") {
  const auto a = Actors::make(1);
  const auto issued = issue_genesis({a.user.public_key(), {}, {}}, a.gba, {}, 42);
  REQUIRE(std::holds_alternative<GenesisBlock>(issued));
  const auto g = countersign_genesis(std::get<GenesisBlock>(issued), a.user);
  REQUIRE(g.config.size() == 1);
  CHECK(g.config[0].key == config_keys::kUserPublicKey);
  CHECK(g.core.data_hash == oracle_merkle({canonical_encode(g.config[0])}));
  CHECK(g.core.created_at == 42);
  CHECK(validate_genesis_block(g, a.gba.public_key(), a.user.public_key()).ok());
}

TEST_CASE("genesis config entries survive storage") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(2));
  const auto firewall = seeded_key("firewall", 2).public_key();
  const auto created = api.create_ledger(0, {{"firewall_public_key", firewall.to_vector()}});
  const auto stored = api.read_ledger(created.ledger.ledger_address);
  const auto* entry = stored.genesis.find_config("firewall_public_key");
  REQUIRE(entry != nullptr);
  CHECK(*entry == firewall.to_vector());
}

TEST_CASE("KYC deny list refuses genesis") {
  const auto a = Actors::make(3);
  KycPolicy policy;
  policy.deny.insert(to_bytes("blocked"));
  const auto r = issue_genesis({a.user.public_key(), {}, to_bytes("blocked")}, a.gba, policy, 0);
  REQUIRE(std::holds_alternative<Refusal>(r));
  CHECK(std::get<Refusal>(r).code == RefusalCode::kyc_denied);

  WorldConfig cfg;
  cfg.kyc = policy;
  World world(cfg);
  ApiOptions opts;
  opts.kyc_blob = to_bytes("blocked");
  auto api = world.agent(phrase(3), opts);
  try {
    api.create_ledger(0);
    FAIL("denied user got a ledger");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::refused);
  }
  CHECK(api.list_ledgers().empty());
}

// ---------------------------------------------------------------- ESP

TEST_CASE("execution signs chaincode output") {
  const auto a = Actors::make(4);
  const auto reg = chaincode::Registry::with_builtins();
  const auto tx = signed_tx(a, to_bytes("+25"), std::string("balance"));
  const auto r = execute_and_sign(tx, a.user.public_key(), to_bytes("100"), reg, a.esps[1]);
  REQUIRE(std::holds_alternative<Execution>(r));
  const auto& ex = std::get<Execution>(r);
  CHECK(to_string(ex.ct.output) == "125");
  CHECK(to_string(ex.new_state) == "125");
  CHECK(verify(a.esps[1].public_key(), execution_signing_bytes(ex.ct.inner, ex.ct.output), ex.ct.executing_signature));

  auto tampered = tx;
  tampered.payload = to_bytes("+26");
  const auto bad = execute_and_sign(tampered, a.user.public_key(), to_bytes("100"), reg, a.esps[1]);
  REQUIRE(std::holds_alternative<Refusal>(bad));
  CHECK(std::get<Refusal>(bad).code == RefusalCode::bad_user_signature);

  const auto unknown = execute_and_sign(signed_tx(a, to_bytes("1"), std::string("nope")), a.user.public_key(), {},
                                        reg, a.esps[0]);
  CHECK(std::get<Refusal>(unknown).code == RefusalCode::unknown_chaincode);
  const auto malformed = execute_and_sign(signed_tx(a, to_bytes("1x"), std::string("balance")), a.user.public_key(),
                                          to_bytes("0"), reg, a.esps[0]);
  CHECK(std::get<Refusal>(malformed).code == RefusalCode::malformed_payload);
}

TEST_CASE("ESP rejects a transaction signed with the wrong phrase") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(5));
  const auto created = api.create_ledger(0);
  const auto impostor = derive_ledger_keypair(derive_root_keypair(phrase(6)), 0);

  Transaction tx;
  tx.ledger_address = created.ledger.ledger_address;
  tx.payload = to_bytes("forged");
  tx.user_signature = impostor.sign(transaction_signing_bytes(tx));
  SubmitTx msg{tx, *created.ledger.genesis.user_public_key(), "osp1", {}};
  const auto reply = world.network().send("user", "esp1", encode_message(msg));
  REQUIRE(reply.ok());
  const auto m = decode_message(reply.frame());
  REQUIRE(std::holds_alternative<Refusal>(m));
  CHECK(std::get<Refusal>(m).code == RefusalCode::bad_user_signature);
}

// ---------------------------------------------------------------- OSP

TEST_CASE("count cutting condition") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(7));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  CHECK(api.submit(addr, to_bytes("1")).commits.empty());
  CHECK(api.submit(addr, to_bytes("2")).commits.empty());
  const auto third = api.submit(addr, to_bytes("3"));
  REQUIRE(third.commits.size() == 1);
  CHECK(third.commits[0].transactions == 3);
  CHECK(api.local_ledger(addr).blocks.at(0).transactions.size() == 3);
}

TEST_CASE("interval cutting condition never emits empty blocks") {
  WorldConfig cfg;
  cfg.cut = CuttingCondition::interval_ms(1000);
  World world(cfg);
  auto api = world.agent(phrase(8));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  world.clock().advance(5000);
  CHECK(api.poll(addr).empty());
  CHECK(api.local_ledger(addr).blocks.empty());

  api.submit(addr, to_bytes("a"));
  world.clock().advance(400);
  CHECK(api.poll(addr).empty());
  api.submit(addr, to_bytes("b"));
  world.clock().advance(600);
  const auto commits = api.poll(addr);
  REQUIRE(commits.size() == 1);
  CHECK(commits[0].transactions == 2);
  world.clock().advance(5000);
  CHECK(api.poll(addr).empty());
  CHECK(api.local_ledger(addr).blocks.size() == 1);
}

TEST_CASE("size cutting condition cuts at the boundary") {
  WorldConfig cfg;
  cfg.cut = CuttingCondition::size(1u << 20);
  World world(cfg);
  auto api = world.agent(phrase(9));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  std::vector<std::size_t> committed_at;
  for (int i = 0; i < 7; ++i) {
    auto r = api.submit(addr, Bytes(300000, static_cast<std::uint8_t>('a' + i)));
    if (!r.commits.empty()) committed_at.push_back(static_cast<std::size_t>(i));
  }
  // Three 300 kB transactions fit in 1 MiB; the fourth overflows and opens the next block.
  REQUIRE(committed_at == std::vector<std::size_t>{3, 6});
  const auto& l = api.local_ledger(addr);
  REQUIRE(l.blocks.size() == 2);
  CHECK(l.blocks[0].transactions.size() == 3);
  CHECK(l.blocks[1].transactions.size() == 3);
  CHECK(l.blocks[1].transactions[0].inner.payload[0] == 'd');
  api.flush(addr);
  CHECK(api.local_ledger(addr).blocks.size() == 3);
  CHECK(validate_ledger(api.local_ledger(addr), audit_keys(api, api.local_ledger(addr))).ok());
}

TEST_CASE("cutting conditions reject zero thresholds") {
  CHECK_THROWS(CuttingCondition::count(0).validate());
  CHECK_NOTHROW(CuttingCondition::size(1).validate());
  CHECK(CuttingCondition::interval_ms(5).to_string().find("interval") != std::string::npos);
}

// ---------------------------------------------------------------- VSP

TEST_CASE("well-formed candidates get a verifying validation signature") {
  const auto a = Actors::make(10);
  const auto l = genesis_only(a);
  const auto candidate = form_block({executed(a, signed_tx(a, to_bytes("x")))}, a.osp, 5);
  const auto r = validate_candidate(candidate, round_for(a, l), a.vsp);
  REQUIRE(std::holds_alternative<DataBlock>(r));
  const auto& b = std::get<DataBlock>(r);
  CHECK(b.core.previous_hash == chain_hash(l.genesis));
  CHECK(b.core.height == 1);
  CHECK(verify(a.vsp.public_key(), hash_header(b.core).view(), b.validation_signature));
}

TEST_CASE("a transaction ahead of its input is ignored") {
  const auto a = Actors::make(11);
  const auto l = genesis_only(a);
  const auto t1 = executed(a, signed_tx(a, to_bytes("one")));
  const auto t3 = executed(a, signed_tx(a, to_bytes("three")));
  const auto t2 = executed(a, signed_tx(a, encode_envelope({{output_id(t3)}, to_bytes("two")})));
  const auto r = validate_candidate(form_block({t1, t2, t3}, a.osp, 0), round_for(a, l), a.vsp);
  REQUIRE(std::holds_alternative<Refusal>(r));
  CHECK(std::get<Refusal>(r).code == RefusalCode::dependency_order);
  CHECK(std::holds_alternative<DataBlock>(validate_candidate(form_block({t1, t3, t2}, a.osp, 0), round_for(a, l), a.vsp)));
}

TEST_CASE("candidates ordered by another provider are rejected") {
  const auto a = Actors::make(12);
  const auto l = genesis_only(a);
  auto candidate = form_block({executed(a, signed_tx(a, to_bytes("x")))}, a.osp, 0);
  candidate.core.ordering_signature = a.esps[0].sign(candidate.core.exec_sig_root.view());
  const auto r = validate_candidate(candidate, round_for(a, l), a.vsp);
  REQUIRE(std::holds_alternative<Refusal>(r));
  CHECK(std::get<Refusal>(r).code == RefusalCode::bad_ordering_signature);

  auto corrupt_exec = form_block({executed(a, signed_tx(a, to_bytes("y")))}, a.osp, 0);
  corrupt_exec.transactions[0].executing_signature.value[0] ^= 1;
  CHECK(std::holds_alternative<Refusal>(validate_candidate(corrupt_exec, round_for(a, l), a.vsp)));
}

// ---------------------------------------------------------------- user agent

TEST_CASE("create ledger stores a valid genesis everywhere") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(13));
  const auto created = api.create_ledger(0);
  CHECK(created.ledger.length() == 1);
  CHECK(created.ledger.ledger_address == api.ledger_address_for(0));
  for (const auto& id : world.ids(ServiceKind::storage)) {
    const auto stored = world.storage(id).backend().load(created.ledger.ledger_address);
    REQUIRE(stored);
    CHECK(*stored == created.ledger);
    CHECK(validate_ledger(*stored, audit_keys(api, *stored)).ok());
  }
  // Same phrase and index: same address, refused as a duplicate, even from a fresh agent.
  try {
    api.create_ledger(0);
    FAIL("duplicate create succeeded");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::refused);
  }
  auto again = world.agent(phrase(13));
  CHECK(again.ledger_address_for(0) == created.ledger.ledger_address);
  CHECK_THROWS_AS(again.create_ledger(0), ApiError);
}

TEST_CASE("create with every storage provider faulted registers nothing") {
  World world(WorldConfig{});
  for (const auto& id : world.ids(ServiceKind::storage)) world.inject(id, harness::FaultProgram::silent());
  auto api = world.agent(phrase(14));
  try {
    api.create_ledger(0);
    FAIL("create succeeded without storage");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::fault);
  }
  world.heal_all();
  CHECK(api.list_ledgers().empty());
  for (const auto& id : world.ids(ServiceKind::storage)) CHECK(world.storage(id).backend().ledgers().empty());
  CHECK_NOTHROW(api.create_ledger(0));
}

TEST_CASE("all GBAs faulted fails the create with a fault") {
  World world(WorldConfig{});
  for (const auto& id : world.ids(ServiceKind::gba)) world.inject(id, harness::FaultProgram::silent());
  auto api = world.agent(phrase(15));
  try {
    api.create_ledger(0);
    FAIL("create succeeded without a GBA");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::fault);
  }
}

TEST_CASE("submit survives two faulted ESPs") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(16));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  world.inject("esp1", harness::FaultProgram::silent());
  world.inject("esp3", harness::FaultProgram::delayed(world.config().ttl_ms + 1));
  for (int i = 0; i < 6; ++i) {
    const auto r = api.submit(addr, to_bytes(std::to_string(i)));
    CHECK(r.esp_id == "esp2");
    CHECK(r.esp_attempts >= 1);
    CHECK(r.esp_attempts <= 3);
  }
  CHECK(api.local_ledger(addr).blocks.size() == 2);
  for (const auto& id : world.ids(ServiceKind::esp)) world.inject(id, harness::FaultProgram::silent());
  try {
    api.submit(addr, to_bytes("lost"));
    FAIL("submit succeeded with no ESP");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::fault);
  }
}

TEST_CASE("commits extend the tip and rotate the round") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(17));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  std::set<std::string> osps, vsps;
  std::uint64_t height = 0;
  for (int i = 0; i < 60; ++i) {
    const auto r = api.submit(addr, to_bytes(std::to_string(i)));
    for (const auto& c : r.commits) {
      CHECK(c.height == height + 1);
      height = c.height;
      osps.insert(c.osp_id);
      vsps.insert(c.vsp_id);
      CHECK(validate_ledger(api.local_ledger(addr), api.directory(addr)).ok());
    }
  }
  CHECK(height == 20);
  CHECK(osps.size() > 1);
  CHECK(vsps.size() > 1);
  CHECK(api.read_ledger(addr) == api.local_ledger(addr));
}

TEST_CASE("corrupt providers never get an invalid block committed") {
  for (const char* target : {"esp1", "osp1", "vsp1"}) {
    CAPTURE(target);
    World world(WorldConfig{});
    auto api = world.agent(phrase(18));
    const auto addr = api.create_ledger(0).ledger.ledger_address;
    world.inject(target, harness::FaultProgram::corrupt());
    for (int i = 0; i < 30; ++i) api.submit(addr, to_bytes(std::to_string(i)));
    api.flush(addr);
    const auto l = api.read_ledger(addr);
    CHECK(validate_ledger(l, audit_keys(api, l)).ok());
    std::size_t txs = 0;
    for (const auto& b : l.blocks) txs += b.transactions.size();
    CHECK(txs == 30);
  }
}

TEST_CASE("held blocks commit once storage recovers") {
  World world(WorldConfig{});
  auto api = world.agent(phrase(19));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  for (const auto& id : world.ids(ServiceKind::storage)) world.inject(id, harness::FaultProgram::silent());
  api.submit(addr, to_bytes("1"));
  api.submit(addr, to_bytes("2"));
  try {
    api.submit(addr, to_bytes("3"));
    FAIL("commit reported success with no storage");
  } catch (const ApiError& e) {
    CHECK(e.kind() == ApiErrorKind::fault);
  }
  CHECK(api.holding(addr));
  CHECK_FALSE(api.retry_held(addr));
  world.heal("storage2");
  CHECK(api.retry_held(addr));
  CHECK_FALSE(api.holding(addr));
  CHECK(world.storage("storage2").backend().tip(addr)->second == 1);
}

TEST_CASE("randomized workloads stay valid, ordered and fork-free") {
  std::mt19937_64 rng(20);
  const CuttingCondition cuts[] = {CuttingCondition::count(4), CuttingCondition::interval_ms(50),
                                   CuttingCondition::size(2000)};
  for (int trial = 0; trial < 6; ++trial) {
    WorldConfig cfg;
    cfg.seed = 100 + static_cast<std::uint64_t>(trial);
    cfg.cut = cuts[trial % 3];
    CAPTURE(cfg.cut.to_string());
    World world(cfg);
    auto api = world.agent(phrase(200 + static_cast<std::uint64_t>(trial)));
    const auto addr = api.create_ledger(0).ledger.ledger_address;
    const auto n = 1 + uniform_below(rng, trial < 3 ? 40 : 200);
    std::vector<Digest> outputs;
    for (std::uint64_t i = 0; i < n; ++i) {
      world.clock().advance(static_cast<std::int64_t>(uniform_below(rng, 30)));
      Bytes payload = random_bytes(rng, 1 + uniform_below(rng, 200));
      if (!outputs.empty() && uniform_below(rng, 3) == 0) {
        payload = encode_envelope({{outputs[uniform_below(rng, outputs.size())]}, payload});
      }
      outputs.push_back(api.submit(addr, payload).output_id);
      if (uniform_below(rng, 10) == 0) api.poll(addr);
    }
    api.flush(addr);
    const auto l = api.read_ledger(addr);
    CHECK(validate_ledger(l, audit_keys(api, l)).ok());
    std::vector<CompleteTransaction> all;
    for (const auto& b : l.blocks) all.insert(all.end(), b.transactions.begin(), b.transactions.end());
    CHECK(all.size() == n);
    CHECK_FALSE(find_dependency_violation(all, {}));
    for (const auto& id : world.ids(ServiceKind::storage)) {
      const auto stored = world.storage(id).backend().load(addr);
      REQUIRE(stored);
      for (std::size_t i = 0; i < stored->blocks.size(); ++i) CHECK(stored->blocks[i].core.height == i + 1);
      CHECK(*stored == l);
    }
  }
}

TEST_CASE("provider pools") {
  World world(WorldConfig{});
  auto pool = world.pool(3);
  CHECK_NOTHROW(pool.validate());
  for (auto k : kAllKinds) CHECK(pool.size(k) == 3);
  CHECK(pool.draw(ServiceKind::esp, {"esp1", "esp2"})->provider_id == "esp3");
  CHECK_FALSE(pool.draw(ServiceKind::esp, {"esp1", "esp2", "esp3"}));
  ProviderPool empty({}, 1);
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("wire messages round trip with stable tags") {
  const auto a = Actors::make(21);
  std::vector<Message> samples{SubmitTx{signed_tx(a, to_bytes("x")), a.user.public_key(), "osp1", {}},
                               Query{QueryKind::flush, a.address}, Ack{},
                               Refusal{RefusalCode::duplicate, "dup"}};
  std::vector<std::uint64_t> tags{1, 8, 10, 11};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto wire = encode_message(samples[i]);
    CHECK(message_tag(samples[i]) == tags[i]);
    CHECK(decode_message(wire) == samples[i]);
  }
  CHECK(static_cast<int>(RefusalCode::dependency_order) == 8);
  CHECK(refusal_name(RefusalCode::kyc_denied) == "kyc_denied");
  CHECK_THROWS_AS(decode_message(to_bytes("junk")), DecodeError);
}
