#pragma once

// Canonical binary encoding used for hashing, signing, storage and the wire.
//
//   byte field   4-byte big-endian length, then the raw bytes
//   integer      8 bytes big-endian (signed values as two's complement)
//   optional     1-byte presence flag (0 or 1), then the value if present
//   list         4-byte big-endian element count, then each element
//
// Struct fields are written in declaration order. The format is injective:
// every prefix is self-delimiting, so distinct values never share an encoding.

#include <optional>
#include <stdexcept>
#include <string>

#include "pbl/bytes.hpp"

namespace pbl {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Encoder {
 public:
  void field(ByteView bytes);
  void field(std::string_view text) {
    field(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  template <std::size_t N>
  void field(const FixedBytes<N>& fixed) {
    field(fixed.view());
  }
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void flag(bool present) { out_.push_back(present ? 1 : 0); }
  void count(std::size_t n);
  void raw(ByteView bytes) { append(out_, bytes); }

  const Bytes& bytes() const& { return out_; }
  Bytes bytes() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Decoder {
 public:
  explicit Decoder(ByteView in) : in_(in) {}

  Bytes field();
  std::string text();
  template <std::size_t N>
  FixedBytes<N> fixed() {
    auto b = field();
    if (b.size() != N) {
      throw DecodeError("fixed field expected " + std::to_string(N) + " bytes, got " +
                        std::to_string(b.size()));
    }
    return FixedBytes<N>::from(b);
  }
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  bool flag();
  std::uint32_t count();
  ByteView raw(std::size_t n);

  bool done() const { return pos_ == in_.size(); }
  std::size_t position() const { return pos_; }
  void expect_done() const;

 private:
  ByteView take(std::size_t n);
  std::uint32_t u32();

  ByteView in_;
  std::size_t pos_ = 0;
};

/// Implemented by overloads `void encode(Encoder&, const T&)` next to each type.
template <class T>
Bytes canonical_encode(const T& value) {
  Encoder enc;
  encode(enc, value);
  return std::move(enc).bytes();
}

/// Decodes a complete value; trailing bytes are an error.
template <class T>
T canonical_decode(ByteView bytes) {
  Decoder dec(bytes);
  T value{};
  decode(dec, value);
  dec.expect_done();
  return value;
}

void encode(Encoder& enc, const Bytes& b);
void decode(Decoder& dec, Bytes& b);
void encode(Encoder& enc, const std::string& s);
void decode(Decoder& dec, std::string& s);
void encode(Encoder& enc, const Digest& d);
void decode(Decoder& dec, Digest& d);

template <class T>
void encode(Encoder& enc, const std::vector<T>& list) {
  enc.count(list.size());
  for (const auto& item : list) encode(enc, item);
}

template <class T>
void decode(Decoder& dec, std::vector<T>& list) {
  auto n = dec.count();
  list.clear();
  for (std::uint32_t i = 0; i < n; ++i) {
    T item{};
    decode(dec, item);
    list.push_back(std::move(item));
  }
}

template <class T>
void encode(Encoder& enc, const std::optional<T>& opt) {
  enc.flag(opt.has_value());
  if (opt) encode(enc, *opt);
}

template <class T>
void decode(Decoder& dec, std::optional<T>& opt) {
  if (dec.flag()) {
    T value{};
    decode(dec, value);
    opt = std::move(value);
  } else {
    opt.reset();
  }
}

/// 4-byte big-endian length followed by the body; used for wire frames and
/// the file-backed block store.
Bytes frame(ByteView body);
/// Throws DecodeError unless `framed` is exactly one well-formed frame.
Bytes unframe(ByteView framed);

}  // namespace pbl
