#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbl/address.hpp"
#include "pbl/crypto.hpp"
#include "pbl/key_directory.hpp"
#include "pbl/random.hpp"

namespace pbl {

inline constexpr std::size_t kWordListSize = 2048;
inline constexpr std::size_t kMinSeedWords = 12;
inline constexpr std::uint64_t kMaxLedgerIndex = (std::uint64_t{1} << 31) - 1;

/// The bundled 2048-word English mnemonic list.
std::span<const std::string_view> english_word_list();
std::optional<std::uint16_t> word_index(std::string_view word);

/// Reads a word-list file: UTF-8, one word per line, exactly 2048 lines.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

class IdentityError : public std::invalid_argument {
 public:
  explicit IdentityError(const std::string& what, std::optional<std::size_t> word = std::nullopt)
      : std::invalid_argument(what), word_(word) {}
  /// Index of the offending word, when the error is about one.
  std::optional<std::size_t> word() const { return word_; }

 private:
  std::optional<std::size_t> word_;
};

struct SeedPhrase {
  std::vector<std::string> words;

  /// Splits on whitespace and checks length and vocabulary.
  static SeedPhrase parse(std::string_view text);
  /// Throws IdentityError naming the first word outside the list.
  void validate() const;
  std::string to_string() const;

  friend bool operator==(const SeedPhrase&, const SeedPhrase&) = default;
};

template <std::uniform_random_bit_generator G>
SeedPhrase generate_seed_phrase(std::size_t word_count, G& entropy) {
  if (word_count < kMinSeedWords) {
    throw IdentityError("a seed phrase needs at least " + std::to_string(kMinSeedWords) + " words");
  }
  const auto list = english_word_list();
  SeedPhrase phrase;
  phrase.words.reserve(word_count);
  for (std::size_t i = 0; i < word_count; ++i) {
    phrase.words.emplace_back(list[uniform_below(entropy, list.size())]);
  }
  return phrase;
}

KeyPair derive_root_keypair(const SeedPhrase& phrase);
/// Throws IdentityError when index >= 2^31.
KeyPair derive_ledger_keypair(const KeyPair& root, std::uint64_t index);

inline Address root_address(const PublicKey& key) { return Address::for_key(AddressKind::root, key); }
inline Address ledger_address(const PublicKey& key) {
  return Address::for_key(AddressKind::ledger, key);
}

struct LedgerEntry {
  std::uint32_t index = 0;
  Address address;

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct ProviderKey {
  Role role = Role::esp;
  PublicKey key;

  friend bool operator==(const ProviderKey&, const ProviderKey&) = default;
};

/// What the storage service keeps under a user's Root Address: the ledgers
/// it owns and the public keys of every provider that ever signed for it.
struct RootRecord {
  Address root_address;
  std::vector<LedgerEntry> ledgers;
  std::map<std::string, ProviderKey> service_provider_keys;

  const LedgerEntry* find(const Address& ledger) const;
  KeyDirectory provider_directory() const;

  friend bool operator==(const RootRecord&, const RootRecord&) = default;
};

/// True iff the record belongs to `root` and each ledger address re-derives
/// from the root key at its recorded index.
bool verify_root_record(const RootRecord& record, const KeyPair& root);

void encode(Encoder& enc, const LedgerEntry& e);
void decode(Decoder& dec, LedgerEntry& e);
void encode(Encoder& enc, const RootRecord& r);
void decode(Decoder& dec, RootRecord& r);

}  // namespace pbl
