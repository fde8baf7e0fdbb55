#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace pbl;
using namespace pbl::testing;

TEST_CASE("sign and verify") {
  const auto k = seeded_key("a", 1);
  const auto other = seeded_key("b", 1);
  const auto sig = k.sign(Bytes{});
  CHECK(sig.value.size() == kSignatureSize);
  CHECK(sig.signer_id == fingerprint(k.public_key()));
  CHECK(verify(k.public_key(), Bytes{}, sig));
  CHECK_FALSE(verify(other.public_key(), Bytes{}, sig));
  CHECK_FALSE(verify(k.public_key(), Bytes{}, Bytes(10, 0)));
  CHECK(k.sign(to_bytes("m")) == k.sign(to_bytes("m")));
}

TEST_CASE("single bit flips never verify") {
  std::mt19937_64 rng(7);
  const auto k = seeded_key("flip", 7);
  for (int i = 0; i < 1000; ++i) {
    auto msg = random_bytes(rng, 1 + uniform_below(rng, 64));
    auto sig = k.sign(msg);
    const auto bit = uniform_below(rng, (msg.size() + sig.value.size()) * 8);
    if (bit < msg.size() * 8) {
      msg[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    } else {
      const auto b = bit - msg.size() * 8;
      sig.value[b / 8] ^= static_cast<std::uint8_t>(1u << (b % 8));
    }
    CHECK_FALSE(verify(k.public_key(), msg, sig));
  }
}

TEST_CASE("key pairs come from their seed") {
  const Bytes seed(32, 9);
  CHECK(KeyPair::from_seed(seed).public_key() == KeyPair::from_seed(seed).public_key());
  CHECK(KeyPair::from_seed(seed).secret().size() == 32);
  CHECK_THROWS(KeyPair::from_seed(Bytes(31, 9)));
}

TEST_CASE("hash primitives") {
  CHECK(ripemd160(Bytes{}).hex() == "9c1185a5c5e9fc54612808977ee8f548b2258d31");
  CHECK(sha256d(Bytes{}) == sha256(sha256(Bytes{}).view()));
  // HMAC-SHA512 test case 2 from RFC 4231.
  CHECK(hmac_sha512(to_bytes("Jefe"), to_bytes("what do ya want for nothing?")).hex() ==
        "164b7a7bfcf819e2e395fbe73b56e0a387bd64222e831fd610270cd7ea2505549758bf75c05a994a6d034f65f8f0e6fdcaeab1a3"
        "4d4a6b4b636e070a38bce737");
}

TEST_CASE("counting signer") {
  const auto k = seeded_key("c", 1);
  CountingSigner c(k);
  c.sign(Bytes{});
  c.sign(Bytes{1});
  CHECK(c.count() == 2);
  CHECK(c.public_key() == k.public_key());
  c.reset();
  CHECK(c.count() == 0);
}

TEST_CASE("key directory roles") {
  const auto a = Actors::make(1);
  const auto dir = KeyDirectory::from_genesis(make_genesis(a));
  CHECK(dir.resolve(fingerprint(a.osp.public_key()), Role::osp).status == KeyDirectory::Lookup::found);
  CHECK(dir.resolve(fingerprint(a.osp.public_key()), Role::vsp).status == KeyDirectory::Lookup::wrong_role);
  CHECK(dir.resolve(Bytes(8, 0), Role::osp).status == KeyDirectory::Lookup::unregistered);
  CHECK(dir.keys(Role::esp).size() == 3);
  CHECK(dir.has(Role::user, a.user.public_key()));
}
