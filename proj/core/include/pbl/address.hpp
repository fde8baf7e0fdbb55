#pragma once

#include <optional>
#include <stdexcept>

#include "pbl/crypto.hpp"
#include "pbl/encoding.hpp"

namespace pbl {

std::string base58_encode(ByteView data);
/// Returns nullopt on characters outside the Base58 alphabet.
std::optional<Bytes> base58_decode(std::string_view text);

enum class AddressKind : std::uint8_t {
  root = 0x50,
  ledger = 0x51,
};

class AddressError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// version || RIPEMD-160(SHA-256(pubkey)) || first 4 bytes of SHA-256d(version || body),
/// rendered as Base58.
struct Address {
  std::uint8_t version = 0;
  FixedBytes<20> body;
  FixedBytes<4> checksum;

  static Address for_key(AddressKind kind, const PublicKey& key);
  /// Parses Base58 text; rejects bad alphabet, length, checksum, or a
  /// version that differs from `expected`.
  static Address parse(std::string_view text, AddressKind expected);
  /// Like parse but accepts either known version.
  static Address parse_any(std::string_view text);

  bool checksum_valid() const;
  bool is(AddressKind kind) const { return version == static_cast<std::uint8_t>(kind); }
  bool matches_key(const PublicKey& key) const;
  Bytes raw() const;
  std::string to_string() const;

  friend auto operator<=>(const Address&, const Address&) = default;
  friend bool operator==(const Address&, const Address&) = default;
};

void encode(Encoder& enc, const Address& a);
void decode(Decoder& dec, Address& a);

}  // namespace pbl
