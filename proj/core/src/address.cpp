#include "pbl/address.hpp"

#include <algorithm>

namespace pbl {

namespace {

constexpr std::string_view kAlphabet = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

FixedBytes<4> checksum_of(std::uint8_t version, const FixedBytes<20>& body) {
  Bytes pre{version};
  append(pre, body.view());
  auto d = sha256d(pre);
  return FixedBytes<4>::from(ByteView(d.data(), 4));
}

}  // namespace

std::string base58_encode(ByteView data) {
  std::size_t zeros = 0;
  while (zeros < data.size() && data[zeros] == 0) ++zeros;
  // log(256)/log(58) < 1.38
  std::vector<std::uint8_t> b58((data.size() - zeros) * 138 / 100 + 1, 0);
  std::size_t length = 0;
  for (std::size_t i = zeros; i < data.size(); ++i) {
    int carry = data[i];
    std::size_t j = 0;
    for (auto it = b58.rbegin(); (carry != 0 || j < length) && it != b58.rend(); ++it, ++j) {
      carry += 256 * (*it);
      *it = static_cast<std::uint8_t>(carry % 58);
      carry /= 58;
    }
    length = j;
  }
  auto it = b58.begin() + static_cast<std::ptrdiff_t>(b58.size() - length);
  std::string out(zeros, '1');
  for (; it != b58.end(); ++it) out.push_back(kAlphabet[*it]);
  return out;
}

std::optional<Bytes> base58_decode(std::string_view text) {
  std::size_t ones = 0;
  while (ones < text.size() && text[ones] == '1') ++ones;
  std::vector<std::uint8_t> b256((text.size() - ones) * 733 / 1000 + 1, 0);
  std::size_t length = 0;
  for (std::size_t i = ones; i < text.size(); ++i) {
    auto pos = kAlphabet.find(text[i]);
    if (pos == std::string_view::npos) return std::nullopt;
    int carry = static_cast<int>(pos);
    std::size_t j = 0;
    for (auto it = b256.rbegin(); (carry != 0 || j < length) && it != b256.rend(); ++it, ++j) {
      carry += 58 * (*it);
      *it = static_cast<std::uint8_t>(carry % 256);
      carry /= 256;
    }
    length = j;
  }
  Bytes out(ones, 0);
  out.insert(out.end(), b256.end() - static_cast<std::ptrdiff_t>(length), b256.end());
  return out;
}

Address Address::for_key(AddressKind kind, const PublicKey& key) {
  Address a;
  a.version = static_cast<std::uint8_t>(kind);
  a.body = ripemd160(sha256(key.view()).view());
  a.checksum = checksum_of(a.version, a.body);
  return a;
}

bool Address::checksum_valid() const { return checksum == checksum_of(version, body); }

bool Address::matches_key(const PublicKey& key) const {
  return body == ripemd160(sha256(key.view()).view());
}

Bytes Address::raw() const {
  Bytes out{version};
  append(out, body.view());
  append(out, checksum.view());
  return out;
}

std::string Address::to_string() const { return base58_encode(raw()); }

Address Address::parse_any(std::string_view text) {
  auto raw = base58_decode(text);
  if (!raw) throw AddressError("address contains non-Base58 characters");
  if (raw->size() != 25) throw AddressError("address must decode to 25 bytes");
  Address a;
  a.version = (*raw)[0];
  a.body = FixedBytes<20>::from(ByteView(*raw).subspan(1, 20));
  a.checksum = FixedBytes<4>::from(ByteView(*raw).subspan(21, 4));
  if (!a.checksum_valid()) throw AddressError("address checksum mismatch");
  if (!a.is(AddressKind::root) && !a.is(AddressKind::ledger)) {
    throw AddressError("unknown address version");
  }
  return a;
}

Address Address::parse(std::string_view text, AddressKind expected) {
  auto a = parse_any(text);
  if (!a.is(expected)) {
    throw AddressError(expected == AddressKind::root ? "expected a root address"
                                                     : "expected a ledger address");
  }
  return a;
}

void encode(Encoder& enc, const Address& a) { enc.field(a.raw()); }

void decode(Decoder& dec, Address& a) {
  auto raw = dec.field();
  if (raw.size() != 25) throw DecodeError("address field must be 25 bytes");
  a.version = raw[0];
  a.body = FixedBytes<20>::from(ByteView(raw).subspan(1, 20));
  a.checksum = FixedBytes<4>::from(ByteView(raw).subspan(21, 4));
}

}  // namespace pbl
