#pragma once

#include "pbl/bytes.hpp"

namespace pbl {

/// Leaves are hashed with SHA-256, parents are SHA-256(left || right), and a
/// level with an odd node count duplicates its last node. At least one pairing
/// round always runs, so a single leaf L gives H(H(L) || H(L)). An empty list
/// gives the all-zero digest.
Digest merkle_root(std::span<const Bytes> leaves);

}  // namespace pbl
