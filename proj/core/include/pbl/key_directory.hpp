#pragma once

#include <map>
#include <set>

#include "pbl/ledger.hpp"

namespace pbl {

enum class Role : std::uint8_t { user, gba, esp, osp, vsp };

std::string_view role_name(Role role);

/// Resolves signature signer ids to public keys and the roles those keys are
/// registered for. Built from the genesis configuration plus the provider
/// keys recorded under the user's Root Address.
class KeyDirectory {
 public:
  enum class Lookup { found, unregistered, wrong_role };

  struct Resolution {
    Lookup status = Lookup::unregistered;
    PublicKey key;
  };

  void add(Role role, const PublicKey& key);
  Resolution resolve(ByteView signer_id, Role role) const;
  bool has(Role role, const PublicKey& key) const;
  std::vector<PublicKey> keys(Role role) const;
  std::size_t size() const { return entries_.size(); }

  /// Registers the user key and every *_public_key(s) entry from the config.
  static KeyDirectory from_genesis(const GenesisBlock& genesis);
  void merge(const KeyDirectory& other);

 private:
  struct Entry {
    PublicKey key;
    std::set<Role> roles;
  };
  std::multimap<Bytes, Entry> entries_;
};

}  // namespace pbl
