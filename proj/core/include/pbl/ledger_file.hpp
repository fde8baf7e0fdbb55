#pragma once

#include <filesystem>

#include "pbl/ledger.hpp"

namespace pbl {

inline constexpr std::string_view kLedgerFileMagic = "PBL1";

/// "PBL1" || canonical_encode(ledger).
Bytes serialize_ledger_file(const Ledger& l);
/// Throws DecodeError on a missing magic or malformed body.
Ledger parse_ledger_file(ByteView bytes);

void write_ledger_file(const std::filesystem::path& path, const Ledger& l);
Ledger read_ledger_file(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, ByteView bytes);

}  // namespace pbl
