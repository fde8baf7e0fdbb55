#include "pbl/tamper.hpp"

#include <stdexcept>

namespace pbl {

std::vector<Finding> tamper_scan(const Ledger& l, const KeyDirectory& keys) {
  return validate_ledger(l, keys).failures();
}

namespace {

void relink_tail(Ledger& l, std::size_t first_block, const CollusionSigners& s) {
  for (std::size_t i = first_block; i < l.blocks.size(); ++i) {
    auto prev = i == 0 ? chain_hash(l.genesis) : chain_hash(l.blocks[i - 1]);
    const auto height = l.blocks[i].core.height;
    l.blocks[i] = seal_block(std::move(l.blocks[i]), prev, height, s.vsp, s.user);
  }
}

}  // namespace

Ledger rewrite_from_genesis(const Ledger& l, const std::function<void(GenesisBlock&)>& edit,
                            const CollusionSigners& signers) {
  Ledger out = l;
  auto& g = out.genesis;
  edit(g);
  g.core.data_hash = compute_config_hash(g.config);
  g.gba_signature = signers.gba.sign(hash_header(g.core).view());
  g.user_signature = signers.user.sign(block_user_signing_bytes(g.core, g.gba_signature));
  relink_tail(out, 0, signers);
  return out;
}

Ledger rewrite_from_block(const Ledger& l, std::size_t index,
                          const std::function<void(std::vector<CompleteTransaction>&)>& edit,
                          const CollusionSigners& signers) {
  if (index == 0 || index > l.blocks.size()) {
    throw std::out_of_range("rewrite_from_block: index must name a data block");
  }
  Ledger out = l;
  auto& block = out.blocks[index - 1];
  const auto original = block.transactions;
  edit(block.transactions);

  for (std::size_t t = 0; t < block.transactions.size(); ++t) {
    auto& ct = block.transactions[t];
    if (t < original.size() && ct == original[t]) continue;
    ct.inner.user_signature = signers.user.sign(transaction_signing_bytes(ct.inner));
    ct.executing_signature = signers.esp.sign(execution_signing_bytes(ct.inner, ct.output));
  }
  block.core.data_hash = compute_data_hash(block.transactions);
  block.core.exec_sig_root = compute_exec_sig_root(block.transactions);
  block.core.ordering_signature = signers.osp.sign(block.core.exec_sig_root.view());
  relink_tail(out, index - 1, signers);
  return out;
}

namespace {

Bytes block_bytes(const Ledger& l, std::size_t index) {
  if (index > l.blocks.size()) throw std::out_of_range("no block at that ledger position");
  return index == 0 ? canonical_encode(l.genesis) : canonical_encode(l.blocks[index - 1]);
}

template <class T>
std::optional<T> strict_decode(const Bytes& bytes) {
  try {
    auto value = canonical_decode<T>(bytes);
    if (canonical_encode(value) != bytes) return std::nullopt;
    return value;
  } catch (const DecodeError&) {
    return std::nullopt;
  } catch (const std::invalid_argument&) {  // e.g. unknown address version
    return std::nullopt;
  }
}

}  // namespace

std::size_t block_encoded_size(const Ledger& l, std::size_t index) {
  return block_bytes(l, index).size();
}

std::optional<Ledger> mutate_block_byte(const Ledger& l, std::size_t index, std::size_t offset,
                                        std::uint8_t mask) {
  if (mask == 0) throw std::invalid_argument("mutation mask must be nonzero");
  auto bytes = block_bytes(l, index);
  if (offset >= bytes.size()) throw std::out_of_range("mutation offset past the block");
  bytes[offset] ^= mask;
  Ledger out = l;
  if (index == 0) {
    auto g = strict_decode<GenesisBlock>(bytes);
    if (!g) return std::nullopt;
    out.genesis = std::move(*g);
  } else {
    auto b = strict_decode<DataBlock>(bytes);
    if (!b) return std::nullopt;
    out.blocks[index - 1] = std::move(*b);
  }
  return out;
}

}  // namespace pbl
