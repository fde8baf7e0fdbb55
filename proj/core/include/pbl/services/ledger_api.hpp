#pragma once

// The user agent. It owns the tip of each of the user's ledgers, picks a
// fresh ESP per transaction and a VSP/OSP per block, countersigns validated
// blocks and writes them to every storage provider.

#include <deque>

#include "pbl/chaincode.hpp"
#include "pbl/identity.hpp"
#include "pbl/services/messages.hpp"
#include "pbl/services/pool.hpp"
#include "pbl/services/providers.hpp"

namespace pbl::services {

enum class ApiErrorKind : std::uint8_t {
  fault,    // no provider of some kind answered within the TTL
  refused,  // a provider (or the agent) rejected the request
  invalid,  // data read back failed validation
  usage,    // caller error (unknown ledger, bad arguments)
};

std::string_view api_error_kind_name(ApiErrorKind kind);

class ApiError : public std::runtime_error {
 public:
  ApiError(ApiErrorKind kind, const std::string& what,
           std::optional<RefusalCode> code = std::nullopt)
      : std::runtime_error(what), kind_(kind), code_(code) {}
  ApiErrorKind kind() const { return kind_; }
  std::optional<RefusalCode> code() const { return code_; }

 private:
  ApiErrorKind kind_;
  std::optional<RefusalCode> code_;
};

struct ApiOptions {
  std::string agent_id = "user";
  std::int64_t ttl_ms = harness::kDefaultTtlMs;
  /// Record the pool's provider keys in the genesis config so the ledger can
  /// be audited from the file alone.
  bool embed_provider_keys = true;
  Bytes kyc_blob;
};

struct StorageOutcome {
  std::string provider_id;
  bool ok = false;
  std::string detail;
};

struct CreateResult {
  Ledger ledger;
  std::string gba_id;
  std::vector<StorageOutcome> storage;
};

struct CommitEvent {
  std::uint64_t height = 0;
  std::string osp_id;
  std::string vsp_id;
  std::size_t transactions = 0;
  std::vector<StorageOutcome> storage;
};

struct SubmitReceipt {
  Address ledger;
  Transaction tx;
  Digest output_id;
  Bytes output;
  std::string esp_id;
  std::string osp_id;
  std::string vsp_id;
  std::size_t esp_attempts = 0;
  /// Blocks committed while this call ran.
  std::vector<CommitEvent> commits;
};

/// Keys of every provider in the pool under their roles.
KeyDirectory pool_directory(const ProviderPool& pool);

class LedgerApi {
 public:
  LedgerApi(harness::Network& net, ProviderPool pool, KeyPair root, ApiOptions options = {});
  static LedgerApi from_phrase(harness::Network& net, ProviderPool pool, const SeedPhrase& phrase,
                               ApiOptions options = {});

  const Address& root_address() const { return root_address_; }
  const KeyPair& root_key() const { return root_; }
  KeyPair ledger_key(std::uint32_t index) const;
  Address ledger_address_for(std::uint32_t index) const;
  ProviderPool& pool() { return pool_; }
  const ApiOptions& options() const { return options_; }

  /// Genesis from a random GBA, countersigned, stored in every storage
  /// provider, then registered in the RootRecord. Throws ApiError.
  CreateResult create_ledger(std::uint32_t index, std::vector<ConfigEntry> config = {});
  /// Attaches to a ledger created earlier, reading it back from storage.
  const Ledger& open_ledger(std::uint32_t index);

  SubmitReceipt submit(const Address& ledger, Bytes payload,
                       std::optional<std::string> chaincode_id = std::nullopt);
  /// Asks the round's OSP to cut if its interval expired.
  std::vector<CommitEvent> poll(const Address& ledger);
  /// Cuts and commits until nothing is pending.
  std::vector<CommitEvent> flush(const Address& ledger);
  /// Retries a block held because no storage provider accepted it.
  bool retry_held(const Address& ledger);

  /// First storage provider that answers.
  Ledger read_ledger(const Address& ledger);
  std::vector<Address> list_ledgers();
  std::optional<RootRecord> fetch_root_record();

  bool has_ledger(const Address& ledger) const { return sessions_.contains(ledger); }
  const Ledger& local_ledger(const Address& ledger) const;
  KeyDirectory directory(const Address& ledger) const;
  const RootRecord& root_record() const { return root_record_; }
  std::optional<RoundState> round(const Address& ledger) const;
  std::size_t pending(const Address& ledger) const;
  bool holding(const Address& ledger) const;
  const std::vector<CommitEvent>& commits(const Address& ledger) const;
  const std::vector<std::string>& audit_log() const { return audit_; }
  /// Chaincode state after the last committed block.
  Bytes committed_state(const Address& ledger, std::string_view chaincode_id) const;

 private:
  struct Pending {
    std::uint64_t seq = 0;
    Transaction tx;
    Bytes prior_state;
    std::optional<CompleteTransaction> ct;
    Bytes new_state;
    std::uint64_t accepted_epoch = 0;
    std::string esp_id;
    std::size_t attempts = 0;
  };

  struct Session {
    explicit Session(KeyPair k) : key(std::move(k)) {}
    std::uint32_t index = 0;
    KeyPair key;
    Ledger ledger;
    KeyDirectory keys;
    std::optional<RoundState> round;
    std::uint64_t epoch = 0;
    std::set<std::string> round_excluded;
    std::deque<Pending> pending;
    std::map<std::string, Bytes> state;
    std::vector<Digest> history;
    std::optional<DataBlock> held;
    std::vector<CommitEvent> commits;
  };

  enum class Blame : std::uint8_t { esp, osp, vsp, permanent };
  static Blame blame(RefusalCode code);

  Session& session(const Address& ledger);
  const Session& session(const Address& ledger) const;
  Session make_session(std::uint32_t index, KeyPair key, Ledger ledger);

  void ensure_root();
  void store_root();
  RoundOpen round_open(const Session& s, const std::string& vsp_id) const;
  void open_round(Session& s);
  void reset_round(Session& s, std::optional<std::string> exclude);
  void drive(Session& s);
  void push(Session& s, Pending& p);
  void on_validated_block(Session& s, DataBlock block);
  std::vector<StorageOutcome> commit_everywhere(Session& s, const DataBlock& block);
  StorageOutcome commit_to(Session& s, const std::string& storage_id, const CommitBlock& msg);
  bool resync(Session& s, const std::string& storage_id);
  void apply_commit(Session& s, const DataBlock& block, std::vector<StorageOutcome> outcomes);
  void check_held(Session& s);
  std::vector<CommitEvent> cut(Session& s, QueryKind kind);

  struct Reply {
    std::optional<Message> message;
    std::string fault;
  };
  Reply call(const std::string& to, const Message& m);

  harness::Network& net_;
  ProviderPool pool_;
  KeyPair root_;
  Address root_address_;
  ApiOptions options_;
  chaincode::Registry registry_ = chaincode::Registry::with_builtins();
  RootRecord root_record_;
  bool root_loaded_ = false;
  std::map<Address, Session> sessions_;
  std::uint64_t next_seq_ = 1;
  // The transaction whose submit() is running, and what it has learned so far.
  std::uint64_t target_seq_ = 0;
  SubmitReceipt target_receipt_;
  std::vector<std::string> audit_;
};

}  // namespace pbl::services
