#include "pbl/encoding.hpp"

#include <limits>

namespace pbl {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t checked_u32(std::size_t n) {
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw std::length_error("value too large for a 4-byte length prefix");
  }
  return static_cast<std::uint32_t>(n);
}

}  // namespace

void Encoder::field(ByteView bytes) {
  put_u32(out_, checked_u32(bytes.size()));
  append(out_, bytes);
}

void Encoder::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Encoder::count(std::size_t n) { put_u32(out_, checked_u32(n)); }

ByteView Decoder::take(std::size_t n) {
  if (in_.size() - pos_ < n) {
    throw DecodeError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_));
  }
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t Decoder::u32() {
  auto b = take(4);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

Bytes Decoder::field() {
  auto n = u32();
  auto b = take(n);
  return Bytes(b.begin(), b.end());
}

std::string Decoder::text() {
  auto n = u32();
  auto b = take(n);
  return std::string(b.begin(), b.end());
}

std::uint64_t Decoder::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

bool Decoder::flag() {
  auto b = take(1)[0];
  if (b > 1) throw DecodeError("presence flag must be 0 or 1");
  return b == 1;
}

std::uint32_t Decoder::count() {
  auto n = u32();
  // Every element occupies at least one byte, so a count larger than the
  // remaining input is malformed; rejecting it early bounds allocations.
  if (n > in_.size() - pos_) throw DecodeError("list count exceeds remaining input");
  return n;
}

ByteView Decoder::raw(std::size_t n) { return take(n); }

void Decoder::expect_done() const {
  if (!done()) {
    throw DecodeError(std::to_string(in_.size() - pos_) + " trailing bytes after value");
  }
}

void encode(Encoder& enc, const Bytes& b) { enc.field(ByteView(b)); }
void decode(Decoder& dec, Bytes& b) { b = dec.field(); }
void encode(Encoder& enc, const std::string& s) { enc.field(std::string_view(s)); }
void decode(Decoder& dec, std::string& s) { s = dec.text(); }
void encode(Encoder& enc, const Digest& d) { enc.field(d); }
void decode(Decoder& dec, Digest& d) { d = Digest{dec.fixed<32>()}; }

Bytes frame(ByteView body) {
  Bytes out;
  out.reserve(body.size() + 4);
  put_u32(out, checked_u32(body.size()));
  append(out, body);
  return out;
}

Bytes unframe(ByteView framed) {
  Decoder dec(framed);
  auto body = dec.field();
  dec.expect_done();
  return body;
}

}  // namespace pbl
