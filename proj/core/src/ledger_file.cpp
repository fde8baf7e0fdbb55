#include "pbl/ledger_file.hpp"

#include <fstream>
#include <iterator>

namespace pbl {

Bytes serialize_ledger_file(const Ledger& l) {
  Bytes out = to_bytes(kLedgerFileMagic);
  append(out, canonical_encode(l));
  return out;
}

Ledger parse_ledger_file(ByteView bytes) {
  const auto magic = to_bytes(kLedgerFileMagic);
  if (bytes.size() < magic.size() || !std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw DecodeError("not a PBL1 ledger file");
  }
  return canonical_decode<Ledger>(bytes.subspan(magic.size()));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, ByteView bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_ledger_file(const std::filesystem::path& path, const Ledger& l) {
  write_file_atomic(path, serialize_ledger_file(l));
}

Ledger read_ledger_file(const std::filesystem::path& path) {
  return parse_ledger_file(read_file(path));
}

}  // namespace pbl
