#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pbl {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

std::string to_hex(ByteView bytes);

/// Throws std::invalid_argument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

inline void append(Bytes& out, ByteView more) { out.insert(out.end(), more.begin(), more.end()); }

inline Bytes concat(ByteView a, ByteView b) {
  Bytes out;
  out.reserve(a.size() + b.size());
  append(out, a);
  append(out, b);
  return out;
}

/// Fixed-width byte string; the base of Digest, PublicKey and friends.
template <std::size_t N>
struct FixedBytes {
  std::array<std::uint8_t, N> bytes{};

  static constexpr std::size_t size() { return N; }
  const std::uint8_t* data() const { return bytes.data(); }
  std::uint8_t* data() { return bytes.data(); }
  ByteView view() const { return ByteView(bytes.data(), N); }
  Bytes to_vector() const { return Bytes(bytes.begin(), bytes.end()); }
  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
  }
  std::string hex() const { return to_hex(view()); }

  /// Throws std::invalid_argument when the input length is not N.
  static FixedBytes from(ByteView in);

  friend auto operator<=>(const FixedBytes&, const FixedBytes&) = default;
  friend bool operator==(const FixedBytes&, const FixedBytes&) = default;
};

void throw_length_mismatch(std::size_t expected, std::size_t actual);

template <std::size_t N>
FixedBytes<N> FixedBytes<N>::from(ByteView in) {
  if (in.size() != N) throw_length_mismatch(N, in.size());
  FixedBytes<N> out;
  std::copy(in.begin(), in.end(), out.bytes.begin());
  return out;
}

/// SHA-256 output. The all-zero value is the "no previous block" / "no data" sentinel.
struct Digest : FixedBytes<32> {
  static Digest zero() { return Digest{}; }
  static Digest from(ByteView in) { return Digest{FixedBytes<32>::from(in)}; }
};

}  // namespace pbl
