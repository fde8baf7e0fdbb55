#pragma once

// The four signing services. Each is a request handler over wire frames with
// per-ledger serialization; the pure parts (genesis issuance, execution,
// candidate validation) are exposed as functions for direct testing.

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <variant>

#include "pbl/chaincode.hpp"
#include "pbl/harness.hpp"
#include "pbl/services/messages.hpp"

namespace pbl::services {

/// One mutex per ledger address.
class LedgerLocks {
 public:
  std::unique_lock<std::mutex> lock(const Address& ledger);

 private:
  std::mutex guard_;
  std::map<Address, std::unique_ptr<std::mutex>> locks_;
};

class AuditLog {
 public:
  void add(std::string entry);
  std::vector<std::string> entries() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> entries_;
};

/// Common shape of every provider: an id, a signing key and a frame handler.
class Service {
 public:
  Service(std::string id, KeyPair key) : id_(std::move(id)), key_(std::move(key)) {}
  virtual ~Service() = default;
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const std::string& id() const { return id_; }
  const PublicKey& public_key() const { return key_.public_key(); }
  const KeyPair& key() const { return key_; }
  const AuditLog& audit() const { return audit_; }

  /// Decodes the request, dispatches it, and encodes the reply. Malformed
  /// frames get a malformed_message refusal.
  Bytes handle(std::string_view from, ByteView frame);
  harness::Handler handler();

 protected:
  virtual Bytes dispatch(std::string_view from, Message&& msg) = 0;

  std::string id_;
  KeyPair key_;
  AuditLog audit_;
};

// ---------------------------------------------------------------- GBA

/// Know-your-customer stub: allow everything except listed blobs.
struct KycPolicy {
  std::set<Bytes> deny;
  bool allows(ByteView blob) const { return !deny.contains(Bytes(blob.begin(), blob.end())); }
};

/// Builds the GBA-signed genesis for a request (without the user signature),
/// or the refusal. The user key is inserted into the config when absent.
std::variant<GenesisBlock, Refusal> issue_genesis(const GenesisRequest& request, const Signer& gba,
                                                  const KycPolicy& policy, std::int64_t now);

/// Adds the user's countersignature over h(core) || GBA signature.
GenesisBlock countersign_genesis(GenesisBlock genesis, const Signer& user);

class GenesisAuthority final : public Service {
 public:
  GenesisAuthority(std::string id, KeyPair key, harness::Clock& clock, KycPolicy policy = {});
  void set_policy(KycPolicy policy);

 protected:
  Bytes dispatch(std::string_view from, Message&& msg) override;

 private:
  harness::Clock& clock_;
  std::mutex mutex_;
  KycPolicy policy_;
};

// ---------------------------------------------------------------- ESP

struct Execution {
  CompleteTransaction ct;
  Bytes new_state;
};

/// Verifies the user signature, runs the chaincode (or attaches the zero
/// output) and signs (tx, output). Pure apart from signing.
std::variant<Execution, Refusal> execute_and_sign(const Transaction& tx, const PublicKey& user_key,
                                                  ByteView prior_state,
                                                  const chaincode::Registry& registry,
                                                  const Signer& esp,
                                                  std::size_t max_payload = kDefaultMaxPayload);

class ExecutingService final : public Service {
 public:
  ExecutingService(std::string id, KeyPair key, harness::Network& net,
                   chaincode::Registry registry = chaincode::Registry::with_builtins(),
                   std::int64_t ttl_ms = harness::kDefaultTtlMs);
  std::uint64_t executed() const { return executed_; }

 protected:
  Bytes dispatch(std::string_view from, Message&& msg) override;

 private:
  harness::Network& net_;
  chaincode::Registry registry_;
  std::int64_t ttl_ms_;
  LedgerLocks locks_;
  std::atomic<std::uint64_t> executed_{0};
};

// ---------------------------------------------------------------- OSP

struct CuttingCondition {
  enum class Kind : std::uint8_t { count, interval, size };
  Kind kind = Kind::count;
  /// Transactions for count, milliseconds for interval, bytes for size.
  std::uint64_t threshold = 3;

  static CuttingCondition count(std::uint64_t n) { return {Kind::count, n}; }
  static CuttingCondition interval_ms(std::uint64_t ms) { return {Kind::interval, ms}; }
  static CuttingCondition size(std::uint64_t bytes) { return {Kind::size, bytes}; }
  /// Throws std::invalid_argument for a zero threshold.
  void validate() const;
  std::string to_string() const;
  friend bool operator==(const CuttingCondition&, const CuttingCondition&) = default;
};

std::string_view cut_kind_name(CuttingCondition::Kind kind);

/// Unvalidated block over `txs` with data hash, signature root and the
/// ordering signature. Previous hash and height are left for the VSP.
DataBlock form_block(std::vector<CompleteTransaction> txs, const Signer& osp, std::int64_t now);

class OrderingService final : public Service {
 public:
  OrderingService(std::string id, KeyPair key, harness::Network& net, CuttingCondition cut,
                  std::int64_t ttl_ms = harness::kDefaultTtlMs);

  std::size_t pending(const Address& ledger) const;
  const CuttingCondition& cutting_condition() const { return cut_; }

 protected:
  Bytes dispatch(std::string_view from, Message&& msg) override;

 private:
  struct Round {
    RoundOpen open;
    KeyDirectory keys;
    std::vector<CompleteTransaction> mempool;
    std::size_t bytes = 0;
    std::int64_t first_arrival = 0;
    bool active = true;
  };

  Bytes accept(std::string_view from, CompleteTx&& msg);
  Bytes query(const Query& q);
  /// Forms, validates (via the VSP) and returns the reply for one block.
  Bytes cut(Round& round, std::vector<CompleteTransaction> txs);
  bool interval_expired(const Round& round) const;

  harness::Network& net_;
  CuttingCondition cut_;
  std::int64_t ttl_ms_;
  LedgerLocks locks_;
  mutable std::mutex rounds_mutex_;
  std::map<Address, Round> rounds_;
};

// ---------------------------------------------------------------- VSP

/// Checks D1-D4 and dependency order against the round, links the block to
/// the tip, and signs h(core). A dependency-order problem yields the
/// dependency_order refusal (the "ignored" outcome).
std::variant<DataBlock, Refusal> validate_candidate(DataBlock candidate, const RoundOpen& round,
                                                    const Signer& vsp);

class ValidationService final : public Service {
 public:
  ValidationService(std::string id, KeyPair key);
  std::uint64_t signed_blocks() const { return signed_; }

 protected:
  Bytes dispatch(std::string_view from, Message&& msg) override;

 private:
  LedgerLocks locks_;
  std::mutex rounds_mutex_;
  std::map<Address, RoundOpen> rounds_;
  std::atomic<std::uint64_t> signed_{0};
};

}  // namespace pbl::services
