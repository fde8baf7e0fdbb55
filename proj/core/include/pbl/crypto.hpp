#pragma once

#include <atomic>
#include <memory>

#include "pbl/bytes.hpp"

namespace pbl {

Digest sha256(ByteView data);
Digest sha256d(ByteView data);
FixedBytes<20> ripemd160(ByteView data);
FixedBytes<64> hmac_sha512(ByteView key, ByteView message);

/// Ed25519 public key.
struct PublicKey : FixedBytes<32> {
  static PublicKey from(ByteView in) { return PublicKey{FixedBytes<32>::from(in)}; }
};

/// Short identifier carried in signatures so verifiers can find the key:
/// the first 8 bytes of SHA-256(public key).
Bytes fingerprint(const PublicKey& key);

struct Signature {
  Bytes signer_id;
  Bytes value;

  bool empty() const { return value.empty(); }
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline constexpr std::size_t kSignatureSize = 64;

/// Returns false for malformed keys or signatures; never throws.
bool verify(const PublicKey& key, ByteView message, ByteView signature);
inline bool verify(const PublicKey& key, ByteView message, const Signature& signature) {
  return verify(key, message, ByteView(signature.value));
}

class Signer {
 public:
  virtual ~Signer() = default;
  virtual const PublicKey& public_key() const = 0;
  virtual Signature sign(ByteView message) const = 0;
};

/// Ed25519 key pair built from a 32-byte seed. The seed is the secret; it is
/// wiped on destruction and never appears in any encoding.
class KeyPair final : public Signer {
 public:
  static KeyPair from_seed(ByteView seed32);

  KeyPair(const KeyPair&) = default;
  KeyPair& operator=(const KeyPair&) = default;
  ~KeyPair() override;

  const PublicKey& public_key() const override { return public_; }
  Signature sign(ByteView message) const override;
  ByteView secret() const { return secret_.view(); }

 private:
  struct Handle;
  KeyPair() = default;

  PublicKey public_;
  FixedBytes<32> secret_;
  std::shared_ptr<Handle> handle_;
};

/// Forwards to another signer and counts invocations.
class CountingSigner final : public Signer {
 public:
  explicit CountingSigner(const Signer& inner) : inner_(inner) {}

  const PublicKey& public_key() const override { return inner_.public_key(); }
  Signature sign(ByteView message) const override {
    ++count_;
    return inner_.sign(message);
  }
  std::uint64_t count() const { return count_.load(); }
  void reset() { count_ = 0; }

 private:
  const Signer& inner_;
  mutable std::atomic<std::uint64_t> count_{0};
};

/// Fills a buffer from the operating system CSPRNG.
void secure_random(std::span<std::uint8_t> out);

}  // namespace pbl
