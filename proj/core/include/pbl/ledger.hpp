#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pbl/address.hpp"
#include "pbl/crypto.hpp"
#include "pbl/encoding.hpp"

namespace pbl {

inline constexpr std::size_t kDefaultMaxPayload = 1u << 20;

/// Output stored when no chaincode ran.
inline const Bytes& zero_output() {
  static const Bytes kZero{0x00};
  return kZero;
}

struct Transaction {
  Address ledger_address;
  Bytes payload;
  std::optional<std::string> chaincode_id;
  std::int64_t submitted_at = 0;
  /// Optional third-party endorsements (e.g. a statement issuer). Only their
  /// shape is checked; they are covered by the user signature.
  std::vector<Signature> extra_signatures;
  Signature user_signature;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct CompleteTransaction {
  Transaction inner;
  Bytes output;
  Signature executing_signature;

  friend bool operator==(const CompleteTransaction&, const CompleteTransaction&) = default;
};

struct BlockHeaderCore {
  Digest previous_hash;
  Digest data_hash;
  Digest exec_sig_root;
  Signature ordering_signature;
  std::uint64_t height = 0;
  std::int64_t created_at = 0;

  friend bool operator==(const BlockHeaderCore&, const BlockHeaderCore&) = default;
};

struct DataBlock {
  BlockHeaderCore core;
  std::vector<CompleteTransaction> transactions;
  Signature validation_signature;
  Signature user_signature;

  friend bool operator==(const DataBlock&, const DataBlock&) = default;
};

struct ConfigEntry {
  std::string key;
  Bytes value;

  friend bool operator==(const ConfigEntry&, const ConfigEntry&) = default;
};

namespace config_keys {
inline constexpr std::string_view kUserPublicKey = "user_public_key";
inline constexpr std::string_view kEspPublicKeys = "esp_public_keys";
inline constexpr std::string_view kOspPublicKeys = "osp_public_keys";
inline constexpr std::string_view kVspPublicKeys = "vsp_public_keys";
inline constexpr std::string_view kGbaPublicKey = "gba_public_key";
}  // namespace config_keys

struct GenesisBlock {
  BlockHeaderCore core;
  std::vector<ConfigEntry> config;
  Signature gba_signature;
  Signature user_signature;

  const Bytes* find_config(std::string_view key) const;
  std::optional<PublicKey> user_public_key() const;
  /// A default-constructed genesis stands for "no genesis block".
  bool absent() const { return *this == GenesisBlock{}; }

  friend bool operator==(const GenesisBlock&, const GenesisBlock&) = default;
};

struct Ledger {
  GenesisBlock genesis;
  std::vector<DataBlock> blocks;
  Address ledger_address;

  /// Number of blocks including the genesis block.
  std::size_t length() const { return blocks.size() + 1; }
  std::uint64_t tip_height() const { return blocks.empty() ? 0 : blocks.back().core.height; }

  friend bool operator==(const Ledger&, const Ledger&) = default;
};

void encode(Encoder& enc, const Signature& s);
void decode(Decoder& dec, Signature& s);
void encode(Encoder& enc, const Transaction& t);
void decode(Decoder& dec, Transaction& t);
void encode(Encoder& enc, const CompleteTransaction& t);
void decode(Decoder& dec, CompleteTransaction& t);
void encode(Encoder& enc, const BlockHeaderCore& c);
void decode(Decoder& dec, BlockHeaderCore& c);
void encode(Encoder& enc, const DataBlock& b);
void decode(Decoder& dec, DataBlock& b);
void encode(Encoder& enc, const ConfigEntry& e);
void decode(Decoder& dec, ConfigEntry& e);
void encode(Encoder& enc, const GenesisBlock& g);
void decode(Decoder& dec, GenesisBlock& g);
void encode(Encoder& enc, const Ledger& l);
void decode(Decoder& dec, Ledger& l);

// Signed messages.

/// Encoding of every Transaction field before user_signature.
Bytes transaction_signing_bytes(const Transaction& t);
/// What the executing service signs: encode(inner) || encode(output field).
Bytes execution_signing_bytes(const Transaction& inner, ByteView output);
/// What the user signs on a block: h(core) || encoded validation (or GBA)
/// signature, signer id included.
Bytes block_user_signing_bytes(const BlockHeaderCore& core, const Signature& authority_sig);

// Hashes.

/// SHA-256 of the canonical header encoding; signed by the VSP/GBA and the user.
Digest hash_header(const BlockHeaderCore& core);
/// SHA-256(encode(core) || encoded validation signature); the value the next
/// block stores in previous_hash.
Digest chain_hash(const DataBlock& block);
Digest chain_hash(const GenesisBlock& block);

Digest compute_data_hash(std::span<const CompleteTransaction> txs);
Digest compute_exec_sig_root(std::span<const CompleteTransaction> txs);
/// All-zero digest for an empty config.
Digest compute_config_hash(std::span<const ConfigEntry> config);

/// Identifier of a transaction output that later transactions may consume:
/// SHA-256 of the executing-signature message, so it is independent of which
/// executing provider signed.
Digest output_id(const CompleteTransaction& ct);

/// Concatenated 32-byte keys, as stored under the *_public_keys config entries.
Bytes pack_keys(std::span<const PublicKey> keys);
/// Empty when the length is not a multiple of 32, so nothing gets trusted.
std::vector<PublicKey> unpack_keys(ByteView packed);

}  // namespace pbl
