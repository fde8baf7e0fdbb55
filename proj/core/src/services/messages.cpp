#include "pbl/services/messages.hpp"

namespace pbl::services {

std::string_view refusal_name(RefusalCode code) {
  switch (code) {
    case RefusalCode::bad_user_signature: return "bad_user_signature";
    case RefusalCode::unknown_chaincode: return "unknown_chaincode";
    case RefusalCode::malformed_payload: return "malformed_payload";
    case RefusalCode::unregistered_signer: return "unregistered_signer";
    case RefusalCode::bad_executing_signature: return "bad_executing_signature";
    case RefusalCode::bad_ordering_signature: return "bad_ordering_signature";
    case RefusalCode::bad_block: return "bad_block";
    case RefusalCode::dependency_order: return "dependency_order";
    case RefusalCode::unknown_dependency: return "unknown_dependency";
    case RefusalCode::previous_hash_mismatch: return "previous_hash_mismatch";
    case RefusalCode::kyc_denied: return "kyc_denied";
    case RefusalCode::missing_user_key: return "missing_user_key";
    case RefusalCode::not_extending: return "not_extending";
    case RefusalCode::not_found: return "not_found";
    case RefusalCode::duplicate: return "duplicate";
    case RefusalCode::no_round: return "no_round";
    case RefusalCode::osp_unreachable: return "osp_unreachable";
    case RefusalCode::vsp_unreachable: return "vsp_unreachable";
    case RefusalCode::malformed_message: return "malformed_message";
    case RefusalCode::payload_too_large: return "payload_too_large";
    case RefusalCode::bad_validation_signature: return "bad_validation_signature";
    case RefusalCode::bad_user_block_signature: return "bad_user_block_signature";
    case RefusalCode::wrong_ledger: return "wrong_ledger";
    case RefusalCode::unexpected_message: return "unexpected_message";
  }
  return "unknown";
}

namespace {

void encode(Encoder& enc, const PublicKey& k) { enc.field(k); }
void decode(Decoder& dec, PublicKey& k) { k = PublicKey{dec.fixed<32>()}; }

}  // namespace

void encode(Encoder& enc, const KeyGrant& g) {
  enc.u64(static_cast<std::uint64_t>(g.role));
  encode(enc, g.key);
}

void decode(Decoder& dec, KeyGrant& g) {
  auto role = dec.u64();
  if (role > static_cast<std::uint64_t>(Role::vsp)) throw DecodeError("unknown role");
  g.role = static_cast<Role>(role);
  decode(dec, g.key);
}

namespace {

void encode_body(Encoder& enc, const SubmitTx& m) {
  encode(enc, m.tx);
  encode(enc, m.user_key);
  enc.field(std::string_view(m.osp_id));
  enc.field(ByteView(m.prior_state));
}
void decode_body(Decoder& dec, SubmitTx& m) {
  decode(dec, m.tx);
  decode(dec, m.user_key);
  m.osp_id = dec.text();
  m.prior_state = dec.field();
}

void encode_body(Encoder& enc, const CompleteTx& m) {
  encode(enc, m.ct);
  enc.field(ByteView(m.new_state));
  encode(enc, m.validated);
}
void decode_body(Decoder& dec, CompleteTx& m) {
  decode(dec, m.ct);
  m.new_state = dec.field();
  decode(dec, m.validated);
}

void encode_body(Encoder& enc, const BlockCandidate& m) {
  encode(enc, m.ledger_address);
  encode(enc, m.block);
}
void decode_body(Decoder& dec, BlockCandidate& m) {
  decode(dec, m.ledger_address);
  decode(dec, m.block);
}

void encode_body(Encoder& enc, const ValidatedBlock& m) { encode(enc, m.block); }
void decode_body(Decoder& dec, ValidatedBlock& m) { decode(dec, m.block); }

void encode_body(Encoder& enc, const CommitBlock& m) {
  encode(enc, m.ledger_address);
  encode(enc, m.genesis);
  encode(enc, m.block);
}
void decode_body(Decoder& dec, CommitBlock& m) {
  decode(dec, m.ledger_address);
  decode(dec, m.genesis);
  decode(dec, m.block);
  if (m.genesis.has_value() == m.block.has_value()) {
    throw DecodeError("CommitBlock must carry exactly one block");
  }
}

void encode_body(Encoder& enc, const GenesisRequest& m) {
  encode(enc, m.user_key);
  encode(enc, m.config);
  enc.field(ByteView(m.kyc_blob));
}
void decode_body(Decoder& dec, GenesisRequest& m) {
  decode(dec, m.user_key);
  decode(dec, m.config);
  m.kyc_blob = dec.field();
}

void encode_body(Encoder& enc, const GenesisResponse& m) { encode(enc, m.genesis); }
void decode_body(Decoder& dec, GenesisResponse& m) { decode(dec, m.genesis); }

void encode_body(Encoder& enc, const Query& m) {
  enc.u64(static_cast<std::uint64_t>(m.kind));
  encode(enc, m.address);
}
void decode_body(Decoder& dec, Query& m) {
  auto kind = dec.u64();
  if (kind < 1 || kind > 5) throw DecodeError("unknown query kind");
  m.kind = static_cast<QueryKind>(kind);
  decode(dec, m.address);
}

void encode_body(Encoder& enc, const QueryResponse& m) {
  enc.field(ByteView(m.body));
  encode(enc, m.validated);
}
void decode_body(Decoder& dec, QueryResponse& m) {
  m.body = dec.field();
  decode(dec, m.validated);
}

void encode_body(Encoder&, const Ack&) {}
void decode_body(Decoder&, Ack&) {}

void encode_body(Encoder& enc, const Refusal& m) {
  enc.u64(static_cast<std::uint64_t>(m.code));
  enc.field(std::string_view(m.detail));
}
void decode_body(Decoder& dec, Refusal& m) {
  m.code = static_cast<RefusalCode>(dec.u64());
  m.detail = dec.text();
}

void encode_body(Encoder& enc, const RoundOpen& m) {
  encode(enc, m.ledger_address);
  encode(enc, m.user_key);
  enc.field(std::string_view(m.vsp_id));
  encode(enc, m.tip_chain_hash);
  enc.u64(m.tip_height);
  encode(enc, m.keys);
  encode(enc, m.history_output_ids);
}
void decode_body(Decoder& dec, RoundOpen& m) {
  decode(dec, m.ledger_address);
  decode(dec, m.user_key);
  m.vsp_id = dec.text();
  decode(dec, m.tip_chain_hash);
  m.tip_height = dec.u64();
  decode(dec, m.keys);
  decode(dec, m.history_output_ids);
}

void encode_body(Encoder& enc, const PutRootRecord& m) { encode(enc, m.record); }
void decode_body(Decoder& dec, PutRootRecord& m) { decode(dec, m.record); }

template <std::size_t I = 0>
Message decode_alternative(std::uint64_t tag, Decoder& dec) {
  if constexpr (I < std::variant_size_v<Message>) {
    if (tag == I + 1) {
      std::variant_alternative_t<I, Message> value{};
      decode_body(dec, value);
      return value;
    }
    return decode_alternative<I + 1>(tag, dec);
  } else {
    throw DecodeError("unknown message tag " + std::to_string(tag));
  }
}

void flip(Signature& sig) {
  if (!sig.value.empty()) sig.value.front() ^= 0x01;
}

}  // namespace

std::uint64_t message_tag(const Message& m) { return m.index() + 1; }

Bytes encode_message(const Message& m) {
  Encoder enc;
  enc.u64(message_tag(m));
  std::visit([&](const auto& body) { encode_body(enc, body); }, m);
  return frame(enc.bytes());
}

Message decode_message(ByteView framed) {
  auto body = unframe(framed);
  Decoder dec(body);
  auto tag = dec.u64();
  auto msg = decode_alternative(tag, dec);
  dec.expect_done();
  return msg;
}

Bytes corrupt_signatures(ByteView framed) {
  Message msg;
  try {
    msg = decode_message(framed);
  } catch (const DecodeError&) {
    return Bytes(framed.begin(), framed.end());
  }
  std::visit(
      [](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CompleteTx>) {
          flip(m.ct.executing_signature);
        } else if constexpr (std::is_same_v<T, BlockCandidate>) {
          flip(m.block.core.ordering_signature);
        } else if constexpr (std::is_same_v<T, ValidatedBlock>) {
          flip(m.block.validation_signature);
        } else if constexpr (std::is_same_v<T, GenesisResponse>) {
          flip(m.genesis.gba_signature);
        } else if constexpr (std::is_same_v<T, QueryResponse>) {
          if (m.validated) flip(m.validated->validation_signature);
        }
      },
      msg);
  return encode_message(msg);
}

KeyDirectory directory_from_grants(const std::vector<KeyGrant>& grants) {
  KeyDirectory dir;
  for (const auto& g : grants) dir.add(g.role, g.key);
  return dir;
}

std::vector<KeyGrant> grants_from_directory(const KeyDirectory& dir) {
  std::vector<KeyGrant> out;
  for (auto role : {Role::user, Role::gba, Role::esp, Role::osp, Role::vsp}) {
    for (const auto& k : dir.keys(role)) out.push_back({role, k});
  }
  return out;
}

}  // namespace pbl::services
