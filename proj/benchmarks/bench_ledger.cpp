#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "pbl/ledger_file.hpp"
#include "pbl/services/matrix.hpp"
#include "pbl/services/world.hpp"
#include "pbl/validation.hpp"

using namespace pbl;

namespace {

struct Built {
  Ledger ledger;
  KeyDirectory keys;
};

// Ledger of roughly `blocks` data blocks, three transactions each.
const Built& ledger_of(std::int64_t blocks) {
  static std::map<std::int64_t, Built> cache;
  if (auto it = cache.find(blocks); it != cache.end()) return it->second;
  services::World world(services::WorldConfig{});
  std::mt19937_64 rng(static_cast<std::uint64_t>(blocks));
  auto api = world.agent(generate_seed_phrase(12, rng));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  for (std::int64_t i = 0; i < blocks * 3; ++i) api.submit(addr, to_bytes("tx" + std::to_string(i)));
  api.flush(addr);
  auto l = api.read_ledger(addr);
  auto keys = services::ledger_directory(l, api.fetch_root_record());
  return cache.emplace(blocks, Built{std::move(l), std::move(keys)}).first->second;
}

void BM_ValidateLedger(benchmark::State& state) {
  const auto& b = ledger_of(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(validate_ledger(b.ledger, b.keys).ok());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.ledger.length()));
}
BENCHMARK(BM_ValidateLedger)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_LedgerFileRoundTrip(benchmark::State& state) {
  const auto& b = ledger_of(state.range(0));
  for (auto _ : state) {
    auto bytes = serialize_ledger_file(b.ledger);
    benchmark::DoNotOptimize(parse_ledger_file(bytes));
  }
}
BENCHMARK(BM_LedgerFileRoundTrip)->Arg(10)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_SubmitAndCommit(benchmark::State& state) {
  services::World world(services::WorldConfig{});
  std::mt19937_64 rng(5);
  auto api = world.agent(generate_seed_phrase(12, rng));
  const auto addr = api.create_ledger(0).ledger.ledger_address;
  std::int64_t i = 0;
  for (auto _ : state) api.submit(addr, to_bytes("tx" + std::to_string(i++)));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SubmitAndCommit)->Unit(benchmark::kMicrosecond);

}  // namespace
