#include "pbl/merkle.hpp"

#include "pbl/crypto.hpp"

namespace pbl {

Digest merkle_root(std::span<const Bytes> leaves) {
  if (leaves.empty()) return Digest::zero();
  std::vector<Digest> level;
  level.reserve(leaves.size() + 1);
  for (const auto& leaf : leaves) level.push_back(sha256(leaf));

  std::array<std::uint8_t, 64> pair{};
  do {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<Digest> next;
    next.reserve(level.size() / 2 + 1);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      std::copy(level[i].bytes.begin(), level[i].bytes.end(), pair.begin());
      std::copy(level[i + 1].bytes.begin(), level[i + 1].bytes.end(), pair.begin() + 32);
      next.push_back(sha256(pair));
    }
    level = std::move(next);
  } while (level.size() > 1);
  return level.front();
}

}  // namespace pbl
