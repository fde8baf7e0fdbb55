#pragma once

#include <map>
#include <memory>
#include <stdexcept>

#include "pbl/ledger.hpp"

namespace pbl::chaincode {

/// Raised for payloads a chaincode cannot parse; the transaction goes back to
/// the user with this reason instead of getting a zero output.
class PayloadError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct StepResult {
  Bytes state;
  Bytes output;

  friend bool operator==(const StepResult&, const StepResult&) = default;
};

/// A deterministic fold over a ledger's transactions. Implementations must be
/// pure: the same (state, payload) always yields the same result.
class ChaincodeDef {
 public:
  virtual ~ChaincodeDef() = default;
  virtual std::string_view id() const = 0;
  virtual std::string_view state_schema() const = 0;
  virtual Bytes initial_state() const = 0;
  /// `body` is the payload with any envelope already removed.
  virtual StepResult step(ByteView prior_state, ByteView body) const = 0;
};

/// Leaves the state alone and always outputs the zero sentinel.
class NullChaincode final : public ChaincodeDef {
 public:
  std::string_view id() const override { return "null"; }
  std::string_view state_schema() const override { return "empty"; }
  Bytes initial_state() const override { return {}; }
  StepResult step(ByteView prior_state, ByteView body) const override;
};

/// Signed running total. Payload: optional '+' or '-' then 1-18 decimal
/// digits. State and output are the new total as decimal ASCII.
class BalanceChaincode final : public ChaincodeDef {
 public:
  std::string_view id() const override { return "balance"; }
  std::string_view state_schema() const override { return "signed 64-bit total, decimal ASCII"; }
  Bytes initial_state() const override { return to_bytes("0"); }
  StepResult step(ByteView prior_state, ByteView body) const override;

  /// Throws PayloadError on grammar violations.
  static std::int64_t parse_amount(ByteView body);
};

class Registry {
 public:
  /// Registry preloaded with "null" and "balance".
  static Registry with_builtins();

  void add(std::shared_ptr<const ChaincodeDef> def);
  const ChaincodeDef* find(std::string_view id) const;

 private:
  std::map<std::string, std::shared_ptr<const ChaincodeDef>, std::less<>> defs_;
};

struct ExecutionContext {
  Address ledger_address;
  std::map<std::string, Bytes> latest_state;

  /// State for `def`, or its initial state if nothing ran yet.
  Bytes state_for(const ChaincodeDef& def) const;

  friend bool operator==(const ExecutionContext&, const ExecutionContext&) = default;
};

/// Runs `def` on `tx`, advances `ctx`, and returns the output to attach.
/// Throws PayloadError for malformed payloads (envelope or body) and
/// std::invalid_argument if tx names a different chaincode.
Bytes execute(const ChaincodeDef& def, ExecutionContext& ctx, const Transaction& tx);

struct OutputMismatch {
  std::size_t block_index = 0;  // ledger position of the block
  std::size_t tx_index = 0;
  Bytes stored;
  Bytes recomputed;

  friend bool operator==(const OutputMismatch&, const OutputMismatch&) = default;
};

struct ReplayResult {
  Bytes final_state;
  std::vector<OutputMismatch> mismatches;
  std::size_t transactions = 0;
};

/// Folds `def` over every transaction addressed to it, in ledger order, and
/// compares each recomputed output with the stored one. The fold continues on
/// the recomputed state, so one forged output yields exactly one mismatch.
ReplayResult replay(const ChaincodeDef& def, const Ledger& l);

}  // namespace pbl::chaincode
