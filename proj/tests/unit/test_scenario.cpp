#include "doctest.h"
#include "support.hpp"
#include "pbl/services/scenario.hpp"

using namespace pbl;
using namespace pbl::services;
using namespace pbl::testing;

TEST_CASE("scenario header parsing") {
  const auto sc = Scenario::parse(
      "# comment\n"
      "seed 9\n"
      "ttl 250\n"
      "cut interval 1000\n"
      "provider esp e1\nprovider esp e2\nprovider osp o1\nprovider vsp v1\nprovider gba g1\nprovider storage s1\n"
      "phrase-seed 4\n"
      "\n"
      "create 0\n"
      "submit 0 hello times 3\n");
  CHECK(sc.world.seed == 9);
  CHECK(sc.world.ttl_ms == 250);
  CHECK(sc.world.cut == CuttingCondition::interval_ms(1000));
  CHECK(sc.world.providers.size() == 6);
  CHECK(sc.phrase_seed == 4);
  REQUIRE(sc.steps.size() == 2);
  CHECK(sc.steps[1].op == "submit");
  CHECK(sc.steps[1].line == 14);
}

TEST_CASE("scenario errors name the line") {
  auto line_of = [](std::string_view text) -> std::size_t {
    try {
      Scenario::parse(text);
    } catch (const ScenarioError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("seed 1\nfrobnicate\n") == 2);
  CHECK(line_of("create 0\nseed 2\n") == 2);
  CHECK(line_of("cut bogus 3\n") == 1);
  CHECK(line_of("providers 0\n") == 1);
  CHECK(line_of("create 0\nfault esp1 sometimes\n") == 2);
  CHECK(line_of("create x\n") == 1);
  CHECK_THROWS_AS(parse_cutting_condition("count", 0), std::invalid_argument);
}

TEST_CASE("records render as key=value") {
  Record r;
  r.add("op", "read").add("detail", "two words");
  CHECK(r.kv() == "op=read detail=\"two words\"");
  CHECK(r.get("op") == "read");
  CHECK(r.get("missing").empty());
}

TEST_CASE("lifecycle scenario passes its expectations") {
  const auto sc = Scenario::load(scenario_dir() / "lifecycle.scn");
  std::size_t streamed = 0;
  const auto out = run_scenario(sc, [&](const Record&) { ++streamed; });
  CHECK(out.ok());
  CHECK(out.expectations > 0);
  CHECK(out.expectation_failures == 0);
  CHECK(streamed == out.records.size());
  CHECK(out.records.front().get("op") == "world");
  CHECK(out.records.back().get("verdict") == "pass");
}

TEST_CASE("failed expectations fail the scenario") {
  const auto out = run_scenario(Scenario::parse("providers 1\ncreate 0\nfault storage1 silent\nread 0\nexpect ok\n"));
  CHECK_FALSE(out.ok());
  CHECK(out.expectation_failures == 1);
  CHECK(out.records.back().get("verdict") == "fail");
}

TEST_CASE("small fault matrix from a scenario") {
  const auto out = run_scenario(Scenario::parse("seed 2\nmatrix 1\nexpect ok\n"));
  REQUIRE(out.matrices.size() == 1);
  const auto& m = out.matrices[0];
  CHECK(m.runs.size() == 32);
  CHECK(m.read_ok() == 16);
  CHECK(m.write_ok() == 1);
  CHECK(m.matches());
  CHECK(out.ok());
  const auto rows = matrix_records(m);
  CHECK(rows.back().get("verdict") == "match");
}

TEST_CASE("fault matrix with two providers per kind") {
  MatrixOptions o;
  o.m = 2;
  const auto r = run_fault_matrix(o);
  CHECK(r.runs.size() == 1024);
  // Reads need one of two storage providers; writes need one of each kind.
  CHECK(r.read_ok() == 1024 - 256);
  CHECK(r.write_ok() == 243);
  CHECK(r.read_mismatches() == 0);
  CHECK(r.write_mismatches() == 0);
  CHECK(r.invalid_ledgers() == 0);
  CHECK_THROWS_AS(run_fault_matrix(MatrixOptions{5}), std::invalid_argument);
}
