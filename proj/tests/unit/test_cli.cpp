#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "pbl/chaincode.hpp"
#include "pbl/cli.hpp"
#include "pbl/ledger_file.hpp"
#include "pbl/random.hpp"
#include "pbl/tamper.hpp"
#include "pbl/services/matrix.hpp"
#include "support.hpp"

using namespace pbl;
using namespace pbl::testing;

namespace {

using Fields = std::map<std::string, std::string>;

// Independent reader for `k=v "quoted value"` lines.
Fields parse_kv(const std::string& line) {
  Fields out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    auto eq = line.find('=', i);
    if (eq == std::string::npos) break;
    auto key = line.substr(i, eq - i);
    i = eq + 1;
    std::string value;
    if (i < line.size() && line[i] == '"') {
      ++i;
      while (i < line.size() && line[i] != '"') {
        if (line[i] == '\\') ++i;
        value += line[i++];
      }
      ++i;
    } else {
      while (i < line.size() && line[i] != ' ') value += line[i++];
    }
    out[key] = value;
  }
  return out;
}

struct Result {
  int code = 0;
  std::vector<Fields> records;
  std::string out;
  std::string err;

  std::vector<Fields> op(const std::string& name) const {
    std::vector<Fields> r;
    for (const auto& f : records) {
      if (f.count("op") && f.at("op") == name) r.push_back(f);
    }
    return r;
  }
};

Result pbl_run(std::vector<std::string> args, std::optional<std::string> phrase = std::nullopt) {
  cli::Env env;
  env.getenv = [phrase](const std::string& name) -> std::optional<std::string> {
    if (name == "PBL_SEED_PHRASE") return phrase;
    return std::nullopt;
  };
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err, env);
  r.out = out.str();
  r.err = err.str();
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    if (line.find("op=") != std::string::npos) r.records.push_back(parse_kv(line));
  }
  return r;
}

std::string short_hex(const Digest& d) { return d.hex().substr(0, 16); }

}  // namespace

TEST_CASE("keygen prints a phrase of the requested length and its root address") {
  for (std::size_t words : {12, 24}) {
    auto r = pbl_run({"--format", "kv", "keygen", "--words", std::to_string(words)});
    REQUIRE(r.code == 0);
    auto k = r.op("keygen");
    REQUIRE(k.size() == 1);
    auto phrase = SeedPhrase::parse(k[0]["phrase"]);
    CHECK(phrase.words.size() == words);
    CHECK(k[0]["root_address"] ==
          root_address(derive_root_keypair(phrase).public_key()).to_string());
  }
}

TEST_CASE("keygen with the fixture phrase path reproduces the frozen address") {
  auto phrase = SeedPhrase::parse(std::string(kFixturePhrase));
  CHECK(root_address(derive_root_keypair(phrase).public_key()).to_string() ==
        "ZKkk2ueXufvQBfqPsdjHoeeo9og5nX7KNd");
}

TEST_CASE("usage errors exit 4") {
  CHECK(pbl_run({}).code == 4);
  CHECK(pbl_run({"frobnicate"}).code == 4);
  CHECK(pbl_run({"keygen", "--words", "13"}).code == 4);
  CHECK(pbl_run({"audit"}).code == 4);
  CHECK(pbl_run({"audit", "--file", "/nonexistent/x.pbl"}).code == 4);
  CHECK(pbl_run({"--cut", "count", "keygen"}).code == 4);
  CHECK(pbl_run({"--cut", "sideways:3", "keygen"}).code == 4);
  CHECK(pbl_run({"submit", "--payload", "1"}).code == 4);  // no phrase anywhere
  CHECK(pbl_run({"simulate", "/nonexistent.scn"}).code == 4);
  CHECK(pbl_run({"--help"}).code == 0);
}

TEST_CASE("a bad config file is a usage error") {
  TempDir dir("cli-config");
  auto path = dir.path() / "c.json";
  std::ofstream(path) << R"({"seed": 3, "colour": "red"})";
  auto r = pbl_run({"--config", path.string(), "keygen"});
  CHECK(r.code == 4);
  CHECK(r.err.find("colour") != std::string::npos);
  std::ofstream(path, std::ios::trunc) << R"({"seed": 3, "format": "kv", "cut": {"kind": "size", "threshold": 4096}})";
  r = pbl_run({"--config", path.string(), "keygen"});
  CHECK(r.code == 0);
  CHECK(r.op("keygen").size() == 1);
}

TEST_CASE("audit of the fixtures") {
  auto clean = pbl_run({"--format", "kv", "audit", "--file", (fixture_dir() / "ledger20.pbl").string()});
  CHECK(clean.code == 0);
  REQUIRE(clean.op("audit").size() == 1);
  CHECK(clean.op("audit")[0]["status"] == "valid");
  CHECK(clean.op("audit")[0]["blocks"] == "21");

  auto bad = pbl_run(
      {"--format", "kv", "audit", "--file", (fixture_dir() / "ledger20-tampered.pbl").string()});
  CHECK(bad.code == 2);
  REQUIRE(bad.op("audit").size() == 1);
  CHECK(bad.op("audit")[0]["status"] == "invalid");
  CHECK(bad.op("audit")[0]["first_failure"] == "block " + std::to_string(kTamperedBlock) + " D2");
  REQUIRE(!bad.op("finding").empty());
  CHECK(bad.op("finding")[0]["location"] == "block " + std::to_string(kTamperedBlock));
}

TEST_CASE("show reports the balance state of the balance fixture") {
  auto r = pbl_run({"--format", "kv", "show", "--file", (fixture_dir() / "balance50.pbl").string()});
  REQUIRE(r.code == 0);
  std::vector<std::string> payloads;
  for (auto v : fixture_balance_amounts()) payloads.push_back(std::to_string(v));
  const auto expected = oracle_running_totals(payloads).back();
  REQUIRE(r.op("state").size() == 1);
  CHECK(r.op("state")[0]["value"] == std::to_string(expected));
  CHECK(r.op("ledger")[0]["transactions"] == std::to_string(kBalanceTransactions));
}

TEST_CASE("tamper-demo localizes its own mutation") {
  TempDir dir("cli-tamper");
  const auto out = (dir.path() / "m.pbl").string();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = pbl_run({"--format", "kv", "tamper-demo", "--file",
                      (fixture_dir() / "ledger5.pbl").string(), "--mutation-seed",
                      std::to_string(seed), "--out", out});
    REQUIRE(r.code == 0);
    auto m = r.op("mutation");
    auto loc = r.op("localized");
    REQUIRE(m.size() == 1);
    REQUIRE(loc.size() == 1);
    CHECK(loc[0]["detected"] == "yes");
    const auto block = std::stoul(m[0]["block"]);
    CHECK(loc[0]["first"].find("block " + std::to_string(block)) == 0);
    auto audit = pbl_run({"--format", "kv", "audit", "--file", out});
    CHECK(audit.code == 2);
  }
  CHECK(pbl_run({"tamper-demo", "--file", (fixture_dir() / "ledger5.pbl").string(), "--block", "9"}).code == 4);
}

TEST_CASE("create, submit, show and audit through the storage directory") {
  TempDir dir("cli-flow");
  const std::string phrase(kFixturePhrase);
  const std::vector<std::string> global = {"--format", "kv", "--storage-dir", dir.path().string(),
                                           "--seed", "9", "--rng-seed", "4", "--clock-start", "1000"};
  auto with = [&](std::vector<std::string> rest) {
    auto args = global;
    args.insert(args.end(), rest.begin(), rest.end());
    return pbl_run(args, phrase);
  };

  auto created = with({"create-ledger", "--index", "0"});
  REQUIRE(created.code == 0);
  const auto address = created.op("create-ledger").at(0)["address"];
  CHECK(created.op("storage").size() == 3);
  CHECK(created.op("create-ledger")[0]["storage_ok"] == "3/3");
  CHECK(with({"create-ledger", "--index", "0"}).code == 2);

  auto submitted = with({"submit", "--index", "0", "--payload", "+7", "--chaincode", "balance",
                         "--repeat", "5"});
  REQUIRE(submitted.code == 0);
  CHECK(submitted.op("submit").size() == 5);
  REQUIRE(submitted.op("flush").size() == 1);
  CHECK(submitted.op("flush")[0]["state"] == "35");

  auto shown = with({"show", "--index", "0"});
  REQUIRE(shown.code == 0);
  CHECK(shown.op("ledger")[0]["address"] == address);
  CHECK(shown.op("ledger")[0]["transactions"] == "5");
  CHECK(shown.op("state")[0]["value"] == "35");

  auto by_address = with({"show", "--ledger", address, "--export", (dir.path() / "e.pbl").string()});
  REQUIRE(by_address.code == 0);
  auto exported = read_ledger_file(dir.path() / "e.pbl");
  CHECK(exported.ledger_address.to_string() == address);
  CHECK(by_address.op("export")[0]["bytes"] == std::to_string(serialize_ledger_file(exported).size()));

  auto audited = with({"audit", "--index", "0"});
  CHECK(audited.code == 0);
  CHECK(audited.op("audit")[0]["status"] == "valid");
  CHECK(with({"audit", "--ledger", "not-an-address"}).code == 4);
}

TEST_CASE("simulate replays a scenario") {
  TempDir dir("cli-sim");
  auto path = dir.path() / "m.scn";
  std::ofstream(path) << "seed 2\nmatrix 1\nexpect ok\n";
  auto r = pbl_run({"--format", "kv", "simulate", path.string()});
  CHECK(r.code == 0);
  CHECK(!r.op("matrix-row").empty());
  REQUIRE(r.op("matrix").size() == 1);

  auto text = pbl_run({"simulate", path.string()});
  CHECK(text.code == 0);
  CHECK(text.out.find("read_ok") != std::string::npos);

  std::ofstream(path, std::ios::trunc) << "seed 2\nfly away\n";
  auto broken = pbl_run({"simulate", path.string()});
  CHECK(broken.code == 4);
  CHECK(broken.err.find("line 2") != std::string::npos);

  auto lifecycle = pbl_run({"--format", "kv", "simulate", (scenario_dir() / "lifecycle.scn").string()});
  CHECK(lifecycle.code == 0);
}

TEST_CASE("randomized invocations agree with direct module calls") {
  std::mt19937_64 rng(77);
  TempDir dir("cli-diff");
  const auto a = Actors::make(31);
  for (int trial = 0; trial < 20; ++trial) {
    switch (trial % 3) {
      case 0: {
        const auto seed = rng();
        const std::size_t words = 12 + 3 * uniform_below(rng, 5);
        auto r = pbl_run({"--format", "kv", "keygen", "--words", std::to_string(words),
                          "--entropy-seed", std::to_string(seed)});
        REQUIRE(r.code == 0);
        std::mt19937_64 g(seed);
        auto phrase = generate_seed_phrase(words, g);
        CHECK(r.op("keygen")[0]["phrase"] == phrase.to_string());
        CHECK(r.op("keygen")[0]["root_address"] ==
              root_address(derive_root_keypair(phrase).public_key()).to_string());
        break;
      }
      case 1: {
        auto l = random_ledger(a, 1 + uniform_below(rng, 6), rng);
        const auto path = dir.path() / ("l" + std::to_string(trial) + ".pbl");
        write_ledger_file(path, l);
        auto r = pbl_run({"--format", "kv", "show", "--file", path.string()});
        REQUIRE(r.code == 0);
        auto blocks = r.op("block");
        REQUIRE(blocks.size() == l.length());
        CHECK(blocks[0]["chain_hash"] == short_hex(chain_hash(l.genesis)));
        for (std::size_t i = 0; i < l.blocks.size(); ++i) {
          CHECK(blocks[i + 1]["chain_hash"] == short_hex(chain_hash(l.blocks[i])));
          CHECK(blocks[i + 1]["transactions"] == std::to_string(l.blocks[i].transactions.size()));
        }
        CHECK(r.op("ledger")[0]["height"] == std::to_string(l.tip_height()));
        break;
      }
      default: {
        auto l = random_ledger(a, 2 + uniform_below(rng, 5), rng);
        const auto target = 1 + uniform_below(rng, l.blocks.size());
        std::optional<Ledger> m;
        while (!m) {
          m = mutate_block_byte(l, target, uniform_below(rng, block_encoded_size(l, target)),
                                static_cast<std::uint8_t>(1U << uniform_below(rng, 8)));
        }
        const auto path = dir.path() / ("t" + std::to_string(trial) + ".pbl");
        write_ledger_file(path, *m);
        auto r = pbl_run({"--format", "kv", "audit", "--file", path.string()});
        auto report = validate_ledger(*m, services::ledger_directory(*m, std::nullopt));
        CHECK(r.code == (report.ok() ? 0 : 2));
        CHECK(r.op("finding").size() == report.failures().size());
        if (auto first = report.first_failure()) {
          CHECK(r.op("audit")[0]["first_failure"] ==
                first->location() + " " + std::string(condition_code(first->condition)));
        }
        break;
      }
    }
  }
}
