#pragma once

// Exhaustive fault-subset experiment over a pool with m providers per kind.
// Each run silences one subset of providers and tries a read of an existing
// ledger and a write (new ledger plus one committed transaction).

#include <array>
#include <functional>

#include "pbl/services/world.hpp"

namespace pbl::services {

/// Auditor's key view of a ledger: genesis config plus RootRecord keys.
KeyDirectory ledger_directory(const Ledger& ledger, const std::optional<RootRecord>& root);

struct MatrixOptions {
  std::size_t m = 3;
  std::uint64_t seed = 1;
  std::int64_t ttl_ms = harness::kDefaultTtlMs;
  std::uint64_t phrase_seed = 1;
  /// Data blocks in the pre-existing ledger used for reads.
  std::size_t base_blocks = 2;
  /// 0 = hardware concurrency.
  std::size_t threads = 0;
};

struct MatrixRun {
  std::uint64_t mask = 0;  // bit i set = provider i silenced
  std::array<std::size_t, 5> healthy{};  // indexed by ServiceKind
  bool read_ok = false;
  bool write_ok = false;
  std::string read_error;
  std::string write_error;
  std::optional<ApiErrorKind> write_error_kind;
  /// Stored ledgers that failed validation or forked after this run.
  std::size_t invalid_ledgers = 0;
};

struct MatrixReport {
  MatrixOptions options;
  std::vector<ProviderSpec> providers;  // bit order of MatrixRun::mask
  std::vector<MatrixRun> runs;          // ordered by mask

  static bool expected_read(const MatrixRun& r);
  static bool expected_write(const MatrixRun& r);

  std::size_t read_ok() const;
  std::size_t write_ok() const;
  std::size_t read_mismatches() const;
  /// Outcome differs from expectation, or a failed write was not a fault.
  std::size_t write_mismatches() const;
  std::size_t invalid_ledgers() const;
  bool matches() const;
};

/// `progress(done, total)` is called from worker threads.
MatrixReport run_fault_matrix(const MatrixOptions& options,
                              std::function<void(std::size_t, std::size_t)> progress = {});

}  // namespace pbl::services
