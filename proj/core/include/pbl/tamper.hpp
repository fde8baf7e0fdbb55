#pragma once

#include <functional>

#include "pbl/validation.hpp"

namespace pbl {

/// Every failed condition in the ledger, in chain order. Empty iff the ledger
/// is valid.
std::vector<Finding> tamper_scan(const Ledger& l, const KeyDirectory& keys);

/// Private keys of every party, as held by a hypothetical coalition that wants
/// to rewrite history without leaving evidence.
struct CollusionSigners {
  const Signer& gba;
  const Signer& esp;
  const Signer& osp;
  const Signer& vsp;
  const Signer& user;
};

/// Applies `edit` to the genesis block, then re-signs whatever the edit
/// invalidated: the genesis (GBA + user) and, for every later block, its
/// previous hash, validation signature and user signature.
Ledger rewrite_from_genesis(const Ledger& l, const std::function<void(GenesisBlock&)>& edit,
                            const CollusionSigners& signers);

/// Applies `edit` to the transactions of the block at `index` (1-based ledger
/// position). Changed transactions are re-signed by the user and the ESP, the
/// block's data hash, signature root and ordering signature are rebuilt, and
/// the block plus all later blocks are re-linked and re-signed.
Ledger rewrite_from_block(const Ledger& l, std::size_t index,
                          const std::function<void(std::vector<CompleteTransaction>&)>& edit,
                          const CollusionSigners& signers);

/// Length of the canonical encoding of the block at ledger position `index`
/// (0 = genesis).
std::size_t block_encoded_size(const Ledger& l, std::size_t index);

/// Copy of `l` with byte `offset` of that block's encoding XORed with `mask`.
/// nullopt when the result is not a canonical encoding of some block.
std::optional<Ledger> mutate_block_byte(const Ledger& l, std::size_t index, std::size_t offset,
                                        std::uint8_t mask);

}  // namespace pbl
