#define OPENSSL_SUPPRESS_DEPRECATED
#include "pbl/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/ripemd.h>
#include <openssl/sha.h>

#include <stdexcept>

namespace pbl {

namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

}  // namespace

Digest sha256(ByteView data) {
  Digest out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Digest sha256d(ByteView data) { return sha256(sha256(data).view()); }

FixedBytes<20> ripemd160(ByteView data) {
  // RIPEMD-160 lives in the legacy provider on OpenSSL 3; the one-shot
  // function does not go through providers.
  FixedBytes<20> out;
  RIPEMD160(data.data(), data.size(), out.data());
  return out;
}

FixedBytes<64> hmac_sha512(ByteView key, ByteView message) {
  FixedBytes<64> out;
  unsigned int len = 0;
  if (HMAC(EVP_sha512(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
           out.data(), &len) == nullptr ||
      len != 64) {
    throw std::runtime_error("HMAC-SHA-512 failed");
  }
  return out;
}

Bytes fingerprint(const PublicKey& key) {
  auto d = sha256(key.view());
  return Bytes(d.bytes.begin(), d.bytes.begin() + 8);
}

bool verify(const PublicKey& key, ByteView message, ByteView signature) {
  if (signature.size() != kSignatureSize) return false;
  PkeyPtr pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.data(), key.size()));
  if (!pkey) return false;
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) {
    return false;
  }
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                          message.size()) == 1;
}

struct KeyPair::Handle {
  PkeyPtr pkey;
};

KeyPair KeyPair::from_seed(ByteView seed32) {
  if (seed32.size() != 32) throw std::invalid_argument("Ed25519 seed must be 32 bytes");
  KeyPair kp;
  kp.secret_ = FixedBytes<32>::from(seed32);
  auto handle = std::make_shared<Handle>();
  handle->pkey.reset(
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed32.data(), seed32.size()));
  if (!handle->pkey) throw std::runtime_error("cannot load Ed25519 private key");
  std::size_t len = 32;
  if (EVP_PKEY_get_raw_public_key(handle->pkey.get(), kp.public_.data(), &len) != 1 || len != 32) {
    throw std::runtime_error("cannot derive Ed25519 public key");
  }
  kp.handle_ = std::move(handle);
  return kp;
}

KeyPair::~KeyPair() { OPENSSL_cleanse(secret_.data(), secret_.size()); }

Signature KeyPair::sign(ByteView message) const {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, handle_->pkey.get()) != 1) {
    throw std::runtime_error("Ed25519 sign init failed");
  }
  Signature sig;
  sig.signer_id = fingerprint(public_);
  sig.value.resize(kSignatureSize);
  std::size_t len = sig.value.size();
  if (EVP_DigestSign(ctx.get(), sig.value.data(), &len, message.data(), message.size()) != 1 ||
      len != kSignatureSize) {
    throw std::runtime_error("Ed25519 sign failed");
  }
  return sig;
}

void secure_random(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
}

}  // namespace pbl
