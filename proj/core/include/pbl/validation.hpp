#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbl/key_directory.hpp"
#include "pbl/ledger.hpp"

namespace pbl {

/// Validity conditions. G* are the genesis-block conditions, D* the data-block
/// conditions, `connection` the link between consecutive blocks, and the two
/// ledger-level structural conditions.
enum class Condition : std::uint8_t {
  structural,              // L1: ledger shape (genesis present, address matches owner)
  single_genesis,          // L2: no data block carries the all-zero previous hash
  genesis_fields,          // G1
  genesis_previous_hash,   // G2
  genesis_gba_signature,   // G3
  genesis_user_signature,  // G4
  block_fields,            // D1
  block_data_hash,         // D2
  block_executing_signatures,  // D3
  block_ordering_signature,    // D4
  block_validation_signature,  // D5
  block_user_signature,        // D6
  connection,                  // C
};

/// Short stable code ("G2", "D4", "C", ...).
std::string_view condition_code(Condition c);
std::string_view condition_name(Condition c);

struct Check {
  /// Position in the ledger (0 = genesis). For `connection` this is the later
  /// block of the pair, i.e. the check covers (index - 1, index).
  std::size_t index = 0;
  Condition condition = Condition::structural;
  bool passed = false;
  std::string reason;

  std::string location() const;
};

using Finding = Check;

class ValidationReport {
 public:
  void pass(std::size_t index, Condition c) { checks_.push_back({index, c, true, {}}); }
  void fail(std::size_t index, Condition c, std::string reason) {
    checks_.push_back({index, c, false, std::move(reason)});
  }
  void add(Check check) { checks_.push_back(std::move(check)); }
  void record(std::size_t index, Condition c, const std::vector<std::string>& problems);
  void append(const ValidationReport& other);

  bool ok() const;
  /// True when every recorded check for `c` passed and at least one exists.
  bool passed(Condition c) const;
  bool failed(Condition c) const;
  const std::vector<Check>& checks() const { return checks_; }
  std::vector<Check> failures() const;
  std::optional<Check> first_failure() const;
  std::string summary() const;

 private:
  std::vector<Check> checks_;
};

/// The four genesis conditions, each reported pass or fail.
ValidationReport validate_genesis_block(const GenesisBlock& g, const PublicKey& gba_key,
                                        const PublicKey& user_key);

/// The six data-block conditions, each reported pass or fail. Signer ids that
/// the directory cannot resolve fail with "unregistered signer".
ValidationReport validate_data_block(const DataBlock& b, const KeyDirectory& keys);
ValidationReport validate_data_block(const DataBlock& b, const KeyDirectory& keys,
                                     std::size_t index);

/// Conditions D1-D4 restricted to what exists before the validation service
/// and the user have signed.
ValidationReport validate_unsigned_block(const DataBlock& b, const KeyDirectory& keys,
                                         std::size_t index);

bool validate_connection(const GenesisBlock& prev, const DataBlock& next);
bool validate_connection(const DataBlock& prev, const DataBlock& next);

/// Runs every check over the whole ledger; first_failure() gives the earliest
/// failing position and condition in chain order.
ValidationReport validate_ledger(const Ledger& l, const KeyDirectory& keys);

class AppendError : public std::runtime_error {
 public:
  AppendError(Condition c, const std::string& what) : std::runtime_error(what), condition_(c) {}
  Condition condition() const { return condition_; }

 private:
  Condition condition_;
};

/// Links `incomplete` to the tip of `l`, has `vsp` sign h(core) and `user`
/// sign h(core) || vsp signature, and returns the extended ledger.
/// Throws AppendError if `l` is invalid or the block fails D1-D4.
Ledger append_block(const Ledger& l, DataBlock incomplete, const KeyDirectory& keys,
                    const Signer& vsp, const Signer& user);

/// The signing half of append_block with no precondition checks: links the
/// block to `prev_chain_hash`, sets its height and collects both signatures.
DataBlock seal_block(DataBlock incomplete, const Digest& prev_chain_hash, std::uint64_t height,
                     const Signer& vsp, const Signer& user);

}  // namespace pbl
