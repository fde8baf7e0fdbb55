#pragma once

// Wire messages exchanged between the user agent and the providers. A frame
// is a 4-byte big-endian length followed by canonical_encode of the message:
// an 8-byte tag (the numbers below never change) then the message fields.

#include <variant>

#include "pbl/identity.hpp"
#include "pbl/ledger.hpp"

namespace pbl::services {

enum class RefusalCode : std::uint16_t {
  bad_user_signature = 1,
  unknown_chaincode = 2,
  malformed_payload = 3,
  unregistered_signer = 4,
  bad_executing_signature = 5,
  bad_ordering_signature = 6,
  bad_block = 7,
  dependency_order = 8,  // the block is "ignored": a transaction precedes its input
  unknown_dependency = 9,
  previous_hash_mismatch = 10,
  kyc_denied = 11,
  missing_user_key = 12,
  not_extending = 13,
  not_found = 14,
  duplicate = 15,
  no_round = 16,
  osp_unreachable = 17,
  vsp_unreachable = 18,
  malformed_message = 19,
  payload_too_large = 20,
  bad_validation_signature = 21,
  bad_user_block_signature = 22,
  wrong_ledger = 23,
  unexpected_message = 24,
};

std::string_view refusal_name(RefusalCode code);

struct KeyGrant {
  Role role = Role::esp;
  PublicKey key;
  friend bool operator==(const KeyGrant&, const KeyGrant&) = default;
};

void encode(Encoder& enc, const KeyGrant& g);
void decode(Decoder& dec, KeyGrant& g);

/// User -> ESP.
struct SubmitTx {
  Transaction tx;
  PublicKey user_key;
  std::string osp_id;
  Bytes prior_state;
  friend bool operator==(const SubmitTx&, const SubmitTx&) = default;
};

/// ESP -> OSP (new_state empty, validated absent) and ESP -> user as the
/// reply, carrying the block if this transaction made the OSP cut one.
struct CompleteTx {
  CompleteTransaction ct;
  Bytes new_state;
  std::optional<DataBlock> validated;
  friend bool operator==(const CompleteTx&, const CompleteTx&) = default;
};

/// OSP -> VSP.
struct BlockCandidate {
  Address ledger_address;
  DataBlock block;
  friend bool operator==(const BlockCandidate&, const BlockCandidate&) = default;
};

/// VSP -> OSP reply; relayed back to the user.
struct ValidatedBlock {
  DataBlock block;
  friend bool operator==(const ValidatedBlock&, const ValidatedBlock&) = default;
};

/// User -> storage. Exactly one of genesis / block is set.
struct CommitBlock {
  Address ledger_address;
  std::optional<GenesisBlock> genesis;
  std::optional<DataBlock> block;
  friend bool operator==(const CommitBlock&, const CommitBlock&) = default;
};

/// User -> GBA.
struct GenesisRequest {
  PublicKey user_key;
  std::vector<ConfigEntry> config;
  Bytes kyc_blob;
  friend bool operator==(const GenesisRequest&, const GenesisRequest&) = default;
};

struct GenesisResponse {
  GenesisBlock genesis;
  friend bool operator==(const GenesisResponse&, const GenesisResponse&) = default;
};

enum class QueryKind : std::uint8_t {
  get_ledger = 1,       // storage: body = canonical Ledger
  list_ledgers = 2,     // storage: body = list of ledger addresses under a root
  get_root_record = 3,  // storage: body = canonical RootRecord
  poll_cut = 4,         // OSP: cut if the interval condition has expired
  flush = 5,            // OSP: cut whatever is pending
};

struct Query {
  QueryKind kind = QueryKind::get_ledger;
  Address address;
  friend bool operator==(const Query&, const Query&) = default;
};

struct QueryResponse {
  Bytes body;
  std::optional<DataBlock> validated;
  friend bool operator==(const QueryResponse&, const QueryResponse&) = default;
};

struct Ack {
  friend bool operator==(const Ack&, const Ack&) = default;
};

struct Refusal {
  RefusalCode code = RefusalCode::malformed_message;
  std::string detail;
  friend bool operator==(const Refusal&, const Refusal&) = default;
};

/// User -> VSP and OSP at the start of a round: who validates, what the tip
/// is, which keys are trusted, and which outputs already exist on the ledger.
struct RoundOpen {
  Address ledger_address;
  PublicKey user_key;
  std::string vsp_id;
  Digest tip_chain_hash;
  std::uint64_t tip_height = 0;
  std::vector<KeyGrant> keys;
  std::vector<Digest> history_output_ids;
  friend bool operator==(const RoundOpen&, const RoundOpen&) = default;
};

/// User -> storage.
struct PutRootRecord {
  RootRecord record;
  friend bool operator==(const PutRootRecord&, const PutRootRecord&) = default;
};

using Message = std::variant<SubmitTx, CompleteTx, BlockCandidate, ValidatedBlock, CommitBlock,
                             GenesisRequest, GenesisResponse, Query, QueryResponse, Ack, Refusal,
                             RoundOpen, PutRootRecord>;

/// Tag written on the wire for each alternative (index + 1).
std::uint64_t message_tag(const Message& m);

Bytes encode_message(const Message& m);
/// Throws DecodeError on bad framing, an unknown tag, or malformed fields.
Message decode_message(ByteView frame);

inline Bytes refuse(RefusalCode code, std::string detail = {}) {
  return encode_message(Refusal{code, std::move(detail)});
}

/// Corrupter for the harness: flips one bit of the signature a provider
/// produced in the message (executing, ordering, validation or GBA signature).
/// Frames without such a signature pass through unchanged.
Bytes corrupt_signatures(ByteView frame);

KeyDirectory directory_from_grants(const std::vector<KeyGrant>& grants);
std::vector<KeyGrant> grants_from_directory(const KeyDirectory& dir);

}  // namespace pbl::services
