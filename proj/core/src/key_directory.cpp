#include "pbl/key_directory.hpp"

namespace pbl {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::user: return "user";
    case Role::gba: return "GBA";
    case Role::esp: return "ESP";
    case Role::osp: return "OSP";
    case Role::vsp: return "VSP";
  }
  return "?";
}

void KeyDirectory::add(Role role, const PublicKey& key) {
  auto id = fingerprint(key);
  auto [lo, hi] = entries_.equal_range(id);
  for (auto it = lo; it != hi; ++it) {
    if (it->second.key == key) {
      it->second.roles.insert(role);
      return;
    }
  }
  entries_.emplace(std::move(id), Entry{key, {role}});
}

KeyDirectory::Resolution KeyDirectory::resolve(ByteView signer_id, Role role) const {
  Resolution out;
  auto [lo, hi] = entries_.equal_range(Bytes(signer_id.begin(), signer_id.end()));
  for (auto it = lo; it != hi; ++it) {
    if (it->second.roles.contains(role)) return {Lookup::found, it->second.key};
    out.status = Lookup::wrong_role;
  }
  return out;
}

bool KeyDirectory::has(Role role, const PublicKey& key) const {
  auto res = resolve(fingerprint(key), role);
  return res.status == Lookup::found && res.key == key;
}

std::vector<PublicKey> KeyDirectory::keys(Role role) const {
  std::vector<PublicKey> out;
  for (const auto& [id, entry] : entries_) {
    if (entry.roles.contains(role)) out.push_back(entry.key);
  }
  return out;
}

KeyDirectory KeyDirectory::from_genesis(const GenesisBlock& genesis) {
  KeyDirectory dir;
  if (auto user = genesis.user_public_key()) dir.add(Role::user, *user);
  const std::pair<std::string_view, Role> lists[] = {
      {config_keys::kEspPublicKeys, Role::esp},
      {config_keys::kOspPublicKeys, Role::osp},
      {config_keys::kVspPublicKeys, Role::vsp},
      {config_keys::kGbaPublicKey, Role::gba},
  };
  for (const auto& [key, role] : lists) {
    if (const auto* v = genesis.find_config(key)) {
      for (const auto& pk : unpack_keys(*v)) dir.add(role, pk);
    }
  }
  return dir;
}

void KeyDirectory::merge(const KeyDirectory& other) {
  for (const auto& [id, entry] : other.entries_) {
    for (auto role : entry.roles) add(role, entry.key);
  }
}

}  // namespace pbl
