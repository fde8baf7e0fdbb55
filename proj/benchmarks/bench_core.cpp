#include <benchmark/benchmark.h>

#include <random>

#include "pbl/crypto.hpp"
#include "pbl/ledger.hpp"
#include "pbl/merkle.hpp"

using namespace pbl;

namespace {

Bytes noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(g());
  return b;
}

void BM_Sha256(benchmark::State& state) {
  const auto data = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(sha256(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Range(64, 1 << 20);

void BM_MerkleRoot(benchmark::State& state) {
  std::vector<Bytes> leaves;
  for (int i = 0; i < state.range(0); ++i) leaves.push_back(noise(96, static_cast<std::uint64_t>(i)));
  for (auto _ : state) benchmark::DoNotOptimize(merkle_root(leaves));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MerkleRoot)->RangeMultiplier(4)->Range(1, 4096);

void BM_Sign(benchmark::State& state) {
  auto key = KeyPair::from_seed(sha256(to_bytes("bench")).view());
  const auto msg = noise(128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(key.sign(msg));
}
BENCHMARK(BM_Sign);

void BM_Verify(benchmark::State& state) {
  auto key = KeyPair::from_seed(sha256(to_bytes("bench")).view());
  const auto msg = noise(128, 3);
  const auto sig = key.sign(msg);
  for (auto _ : state) benchmark::DoNotOptimize(verify(key.public_key(), msg, sig));
}
BENCHMARK(BM_Verify);

void BM_EncodeTransaction(benchmark::State& state) {
  auto key = KeyPair::from_seed(sha256(to_bytes("bench")).view());
  CompleteTransaction ct;
  ct.inner.payload = noise(static_cast<std::size_t>(state.range(0)), 4);
  ct.inner.user_signature = key.sign(transaction_signing_bytes(ct.inner));
  ct.output = zero_output();
  ct.executing_signature = key.sign(execution_signing_bytes(ct.inner, ct.output));
  for (auto _ : state) {
    auto bytes = canonical_encode(ct);
    benchmark::DoNotOptimize(canonical_decode<CompleteTransaction>(bytes));
  }
}
BENCHMARK(BM_EncodeTransaction)->Range(16, 64 << 10);

}  // namespace
BENCHMARK_MAIN();
