#pragma once

// Shared test helpers: deterministic key sets, hand-assembled signed
// ledgers, and reference implementations used as oracles.

#include <filesystem>
#include <random>
#include <string>

#include "pbl/chaincode.hpp"
#include "pbl/crypto.hpp"
#include "pbl/identity.hpp"
#include "pbl/ledger.hpp"
#include "pbl/validation.hpp"

namespace pbl::testing {

std::filesystem::path fixture_dir();
std::filesystem::path scenario_dir();

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

KeyPair seeded_key(std::string_view label, std::uint64_t seed);

/// Every party needed to hand-assemble a ledger.
struct Actors {
  KeyPair user;
  KeyPair gba;
  KeyPair osp;
  KeyPair vsp;
  std::vector<KeyPair> esps;
  Address address;

  static Actors make(std::uint64_t seed, std::size_t esp_count = 3);
  KeyDirectory keys(const GenesisBlock& genesis) const;
};

Transaction signed_tx(const Actors& a, Bytes payload,
                      std::optional<std::string> chaincode = std::nullopt, std::int64_t at = 0);
CompleteTransaction executed(const Actors& a, Transaction tx, Bytes output = zero_output(),
                             std::size_t esp = 0);
/// Block with data_hash, exec_sig_root and ordering signature; unlinked and unsigned.
DataBlock unsigned_block(const Actors& a, std::vector<CompleteTransaction> txs,
                         std::int64_t created_at = 0);
/// Genesis carrying the user key and every provider key of `a`, signed by GBA and user.
GenesisBlock make_genesis(const Actors& a, std::vector<ConfigEntry> extra = {},
                          std::int64_t created_at = 0);
Ledger genesis_only(const Actors& a);
/// Appends a block of `txs` through append_block.
Ledger extend(const Ledger& l, const Actors& a, std::vector<CompleteTransaction> txs);

/// Valid ledger with `data_blocks` blocks of 1..max_tx raw transactions.
Ledger random_ledger(const Actors& a, std::size_t data_blocks, std::mt19937_64& rng,
                     std::size_t max_tx = 3);

/// Valid ledger whose transactions run the balance chaincode on `amounts`,
/// `per_block` transactions per block.
Ledger balance_ledger(const Actors& a, const std::vector<std::int64_t>& amounts,
                      std::size_t per_block);

Bytes random_bytes(std::mt19937_64& rng, std::size_t n);

// ---- oracles, written without the library's hashing or tree code ----

/// SHA-256 straight from OpenSSL's one-shot API.
Digest oracle_sha256(ByteView data);
/// Recursive Merkle root straight from the definition.
Digest oracle_merkle(const std::vector<Bytes>& leaves);
/// Running totals of decimal amounts parsed with std::stoll.
std::vector<std::int64_t> oracle_running_totals(const std::vector<std::string>& payloads);

}  // namespace pbl::testing
