#include "pbl/ledger.hpp"

#include "pbl/merkle.hpp"

namespace pbl {

const Bytes* GenesisBlock::find_config(std::string_view key) const {
  for (const auto& e : config) {
    if (e.key == key) return &e.value;
  }
  return nullptr;
}

std::optional<PublicKey> GenesisBlock::user_public_key() const {
  const auto* v = find_config(config_keys::kUserPublicKey);
  if (v == nullptr || v->size() != 32) return std::nullopt;
  return PublicKey::from(*v);
}

void encode(Encoder& enc, const Signature& s) {
  enc.field(ByteView(s.signer_id));
  enc.field(ByteView(s.value));
}

void decode(Decoder& dec, Signature& s) {
  s.signer_id = dec.field();
  s.value = dec.field();
}

namespace {

void encode_unsigned_transaction(Encoder& enc, const Transaction& t) {
  encode(enc, t.ledger_address);
  enc.field(ByteView(t.payload));
  encode(enc, t.chaincode_id);
  enc.i64(t.submitted_at);
  encode(enc, t.extra_signatures);
}

}  // namespace

void encode(Encoder& enc, const Transaction& t) {
  encode_unsigned_transaction(enc, t);
  encode(enc, t.user_signature);
}

void decode(Decoder& dec, Transaction& t) {
  decode(dec, t.ledger_address);
  t.payload = dec.field();
  decode(dec, t.chaincode_id);
  t.submitted_at = dec.i64();
  decode(dec, t.extra_signatures);
  decode(dec, t.user_signature);
}

void encode(Encoder& enc, const CompleteTransaction& t) {
  encode(enc, t.inner);
  enc.field(ByteView(t.output));
  encode(enc, t.executing_signature);
}

void decode(Decoder& dec, CompleteTransaction& t) {
  decode(dec, t.inner);
  t.output = dec.field();
  decode(dec, t.executing_signature);
}

void encode(Encoder& enc, const BlockHeaderCore& c) {
  encode(enc, c.previous_hash);
  encode(enc, c.data_hash);
  encode(enc, c.exec_sig_root);
  encode(enc, c.ordering_signature);
  enc.u64(c.height);
  enc.i64(c.created_at);
}

void decode(Decoder& dec, BlockHeaderCore& c) {
  decode(dec, c.previous_hash);
  decode(dec, c.data_hash);
  decode(dec, c.exec_sig_root);
  decode(dec, c.ordering_signature);
  c.height = dec.u64();
  c.created_at = dec.i64();
}

void encode(Encoder& enc, const DataBlock& b) {
  encode(enc, b.core);
  encode(enc, b.transactions);
  encode(enc, b.validation_signature);
  encode(enc, b.user_signature);
}

void decode(Decoder& dec, DataBlock& b) {
  decode(dec, b.core);
  decode(dec, b.transactions);
  decode(dec, b.validation_signature);
  decode(dec, b.user_signature);
}

void encode(Encoder& enc, const ConfigEntry& e) {
  enc.field(std::string_view(e.key));
  enc.field(ByteView(e.value));
}

void decode(Decoder& dec, ConfigEntry& e) {
  e.key = dec.text();
  e.value = dec.field();
}

void encode(Encoder& enc, const GenesisBlock& g) {
  encode(enc, g.core);
  encode(enc, g.config);
  encode(enc, g.gba_signature);
  encode(enc, g.user_signature);
}

void decode(Decoder& dec, GenesisBlock& g) {
  decode(dec, g.core);
  decode(dec, g.config);
  decode(dec, g.gba_signature);
  decode(dec, g.user_signature);
}

void encode(Encoder& enc, const Ledger& l) {
  encode(enc, l.genesis);
  encode(enc, l.blocks);
  encode(enc, l.ledger_address);
}

void decode(Decoder& dec, Ledger& l) {
  decode(dec, l.genesis);
  decode(dec, l.blocks);
  decode(dec, l.ledger_address);
}

Bytes transaction_signing_bytes(const Transaction& t) {
  Encoder enc;
  encode_unsigned_transaction(enc, t);
  return std::move(enc).bytes();
}

Bytes execution_signing_bytes(const Transaction& inner, ByteView output) {
  Encoder enc;
  encode(enc, inner);
  enc.field(output);
  return std::move(enc).bytes();
}

Bytes block_user_signing_bytes(const BlockHeaderCore& core, const Signature& authority_sig) {
  return concat(hash_header(core).view(), canonical_encode(authority_sig));
}

Digest hash_header(const BlockHeaderCore& core) { return sha256(canonical_encode(core)); }

namespace {

Digest chain_hash_of(const BlockHeaderCore& core, const Signature& sig) {
  auto pre = canonical_encode(core);
  append(pre, canonical_encode(sig));
  return sha256(pre);
}

}  // namespace

Digest chain_hash(const DataBlock& block) {
  return chain_hash_of(block.core, block.validation_signature);
}

Digest chain_hash(const GenesisBlock& block) {
  return chain_hash_of(block.core, block.gba_signature);
}

Digest compute_data_hash(std::span<const CompleteTransaction> txs) {
  std::vector<Bytes> leaves;
  leaves.reserve(txs.size());
  for (const auto& t : txs) leaves.push_back(canonical_encode(t));
  return merkle_root(leaves);
}

Digest compute_exec_sig_root(std::span<const CompleteTransaction> txs) {
  std::vector<Bytes> leaves;
  leaves.reserve(txs.size());
  for (const auto& t : txs) leaves.push_back(t.executing_signature.value);
  return merkle_root(leaves);
}

Digest compute_config_hash(std::span<const ConfigEntry> config) {
  std::vector<Bytes> leaves;
  leaves.reserve(config.size());
  for (const auto& e : config) leaves.push_back(canonical_encode(e));
  return merkle_root(leaves);
}

Digest output_id(const CompleteTransaction& ct) {
  return sha256(execution_signing_bytes(ct.inner, ct.output));
}

Bytes pack_keys(std::span<const PublicKey> keys) {
  Bytes out;
  out.reserve(keys.size() * 32);
  for (const auto& k : keys) append(out, k.view());
  return out;
}

std::vector<PublicKey> unpack_keys(ByteView packed) {
  std::vector<PublicKey> out;
  if (packed.size() % 32 != 0) return out;
  for (std::size_t i = 0; i < packed.size(); i += 32) {
    out.push_back(PublicKey::from(packed.subspan(i, 32)));
  }
  return out;
}

}  // namespace pbl
