#include "pbl/services/storage.hpp"

#include <fstream>

#include "pbl/ledger_file.hpp"
#include "pbl/validation.hpp"

namespace pbl::services {

// ---------------------------------------------------------------- memory

bool MemoryStore::contains(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  return ledgers_.contains(ledger);
}

std::optional<Ledger> MemoryStore::load(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  auto it = ledgers_.find(ledger);
  if (it == ledgers_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<Digest, std::uint64_t>> MemoryStore::tip(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  auto it = ledgers_.find(ledger);
  if (it == ledgers_.end()) return std::nullopt;
  const auto& l = it->second;
  if (l.blocks.empty()) return std::pair{chain_hash(l.genesis), l.genesis.core.height};
  return std::pair{chain_hash(l.blocks.back()), l.blocks.back().core.height};
}

std::optional<PublicKey> MemoryStore::owner(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  auto it = ledgers_.find(ledger);
  if (it == ledgers_.end()) return std::nullopt;
  return it->second.genesis.user_public_key();
}

void MemoryStore::create(const Address& ledger, const GenesisBlock& genesis) {
  std::lock_guard lock(mutex_);
  if (ledgers_.contains(ledger)) throw StorageError("ledger exists: " + ledger.to_string());
  ledgers_[ledger] = Ledger{genesis, {}, ledger};
}

void MemoryStore::append(const Address& ledger, const DataBlock& block) {
  std::lock_guard lock(mutex_);
  auto it = ledgers_.find(ledger);
  if (it == ledgers_.end()) throw StorageError("unknown ledger: " + ledger.to_string());
  it->second.blocks.push_back(block);
}

std::optional<RootRecord> MemoryStore::load_root(const Address& root) const {
  std::lock_guard lock(mutex_);
  auto it = roots_.find(root);
  if (it == roots_.end()) return std::nullopt;
  return it->second;
}

void MemoryStore::store_root(const RootRecord& record) {
  std::lock_guard lock(mutex_);
  roots_[record.root_address] = record;
}

std::vector<Address> MemoryStore::ledgers() const {
  std::lock_guard lock(mutex_);
  std::vector<Address> out;
  for (const auto& [a, l] : ledgers_) out.push_back(a);
  return out;
}

MemoryStore::Snapshot MemoryStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return {ledgers_, roots_};
}

void MemoryStore::restore(const Snapshot& s) {
  std::lock_guard lock(mutex_);
  ledgers_ = s.ledgers;
  roots_ = s.roots;
}

// ---------------------------------------------------------------- file

namespace {

constexpr std::string_view kBlocksSuffix = ".blocks";
constexpr std::string_view kRootSuffix = ".root";

/// Splits a file of frames; a torn trailing frame (interrupted append) is
/// ignored.
std::vector<ByteView> split_frames(ByteView data) {
  std::vector<ByteView> out;
  std::size_t pos = 0;
  while (data.size() - pos >= 4) {
    const std::size_t len = (std::size_t{data[pos]} << 24) | (std::size_t{data[pos + 1]} << 16) |
                            (std::size_t{data[pos + 2]} << 8) | std::size_t{data[pos + 3]};
    if (data.size() - pos - 4 < len) break;
    out.push_back(data.subspan(pos + 4, len));
    pos += 4 + len;
  }
  return out;
}

}  // namespace

FileStore::FileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FileStore::blocks_path(const Address& a) const {
  return dir_ / (a.to_string() + std::string(kBlocksSuffix));
}

std::filesystem::path FileStore::root_path(const Address& a) const {
  return dir_ / (a.to_string() + std::string(kRootSuffix));
}

bool FileStore::contains(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  return std::filesystem::exists(blocks_path(ledger));
}

std::optional<Ledger> FileStore::load(const Address& ledger) const {
  std::lock_guard lock(mutex_);
  const auto path = blocks_path(ledger);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const auto data = read_file(path);
  const auto frames = split_frames(data);
  if (frames.empty()) throw StorageError("empty block file " + path.string());
  Ledger l;
  l.ledger_address = ledger;
  l.genesis = canonical_decode<GenesisBlock>(frames.front());
  for (std::size_t i = 1; i < frames.size(); ++i) {
    l.blocks.push_back(canonical_decode<DataBlock>(frames[i]));
  }
  owners_[ledger] = l.genesis.user_public_key();
  tips_[ledger] = l.blocks.empty()
                      ? std::pair{chain_hash(l.genesis), l.genesis.core.height}
                      : std::pair{chain_hash(l.blocks.back()), l.blocks.back().core.height};
  return l;
}

std::optional<std::pair<Digest, std::uint64_t>> FileStore::tip(const Address& ledger) const {
  {
    std::lock_guard lock(mutex_);
    auto it = tips_.find(ledger);
    if (it != tips_.end()) return it->second;
  }
  if (!load(ledger)) return std::nullopt;
  std::lock_guard lock(mutex_);
  return tips_.at(ledger);
}

std::optional<PublicKey> FileStore::owner(const Address& ledger) const {
  {
    std::lock_guard lock(mutex_);
    auto it = owners_.find(ledger);
    if (it != owners_.end()) return it->second;
  }
  auto l = load(ledger);
  if (!l) return std::nullopt;
  return l->genesis.user_public_key();
}

void FileStore::append_frame(const Address& ledger, ByteView body, bool create) {
  const auto path = blocks_path(ledger);
  if (create == std::filesystem::exists(path)) {
    throw StorageError((create ? "ledger exists: " : "unknown ledger: ") + ledger.to_string());
  }
  const auto framed = frame(body);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw StorageError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(framed.data()), static_cast<std::streamsize>(framed.size()));
  out.flush();
  if (!out) throw StorageError("short write to " + path.string());
}

void FileStore::create(const Address& ledger, const GenesisBlock& genesis) {
  std::lock_guard lock(mutex_);
  append_frame(ledger, canonical_encode(genesis), true);
  owners_[ledger] = genesis.user_public_key();
  tips_[ledger] = {chain_hash(genesis), genesis.core.height};
}

void FileStore::append(const Address& ledger, const DataBlock& block) {
  std::lock_guard lock(mutex_);
  append_frame(ledger, canonical_encode(block), false);
  tips_[ledger] = {chain_hash(block), block.core.height};
}

std::optional<RootRecord> FileStore::load_root(const Address& root) const {
  std::lock_guard lock(mutex_);
  const auto path = root_path(root);
  if (!std::filesystem::exists(path)) return std::nullopt;
  return canonical_decode<RootRecord>(read_file(path));
}

void FileStore::store_root(const RootRecord& record) {
  std::lock_guard lock(mutex_);
  write_file_atomic(root_path(record.root_address), canonical_encode(record));
}

std::vector<Address> FileStore::ledgers() const {
  std::lock_guard lock(mutex_);
  std::vector<Address> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const auto name = entry.path().filename().string();
    if (!name.ends_with(kBlocksSuffix)) continue;
    try {
      out.push_back(Address::parse(name.substr(0, name.size() - kBlocksSuffix.size()),
                                   AddressKind::ledger));
    } catch (const AddressError&) {
      // not ours
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- service

StorageService::StorageService(std::string id, KeyPair key, std::unique_ptr<StorageBackend> backend)
    : Service(std::move(id), std::move(key)), backend_(std::move(backend)) {}

std::optional<Refusal> StorageService::put_genesis(const Address& ledger,
                                                   const GenesisBlock& genesis) {
  auto guard = locks_.lock(ledger);
  if (backend_->contains(ledger)) {
    return Refusal{RefusalCode::duplicate, "ledger already stored: " + ledger.to_string()};
  }
  auto user = genesis.user_public_key();
  if (!user) return Refusal{RefusalCode::missing_user_key, "genesis config lacks user_public_key"};
  if (!ledger.is(AddressKind::ledger) || !ledger.checksum_valid() || !ledger.matches_key(*user)) {
    return Refusal{RefusalCode::wrong_ledger, "address does not belong to the genesis user key"};
  }
  // The GBA key is not known here; G3 is the auditor's job.
  auto report = validate_genesis_block(genesis, PublicKey{}, *user);
  for (const auto& c : report.failures()) {
    if (c.condition == Condition::genesis_gba_signature) continue;
    return Refusal{RefusalCode::bad_block,
                   std::string(condition_code(c.condition)) + " " + c.reason};
  }
  backend_->create(ledger, genesis);
  return std::nullopt;
}

std::optional<Refusal> StorageService::put_block(const Address& ledger, const DataBlock& block) {
  auto guard = locks_.lock(ledger);
  auto owner = backend_->owner(ledger);
  if (!owner) return Refusal{RefusalCode::not_found, "unknown ledger: " + ledger.to_string()};
  if (block.user_signature.empty() ||
      !verify(*owner, block_user_signing_bytes(block.core, block.validation_signature),
              block.user_signature)) {
    return Refusal{RefusalCode::bad_user_block_signature, "block lacks a valid owner signature"};
  }
  auto tip = backend_->tip(ledger);
  if (block.core.previous_hash != tip->first || block.core.height != tip->second + 1) {
    return Refusal{RefusalCode::not_extending,
                   "block at height " + std::to_string(block.core.height) +
                       " does not extend stored tip " + std::to_string(tip->second)};
  }
  backend_->append(ledger, block);
  return std::nullopt;
}

Bytes StorageService::dispatch(std::string_view from, Message&& msg) {
  if (auto* c = std::get_if<CommitBlock>(&msg)) {
    auto refusal = c->genesis ? put_genesis(c->ledger_address, *c->genesis)
                              : put_block(c->ledger_address, *c->block);
    if (refusal) {
      audit_.add("commit from " + std::string(from) + " refused: " +
                 std::string(refusal_name(refusal->code)) + " " + refusal->detail);
      return encode_message(*refusal);
    }
    return encode_message(Ack{});
  }
  if (auto* p = std::get_if<PutRootRecord>(&msg)) {
    if (!p->record.root_address.is(AddressKind::root)) {
      return refuse(RefusalCode::wrong_ledger, "not a root address");
    }
    auto guard = locks_.lock(p->record.root_address);
    // Merge rather than replace so a writer with a stale view loses nothing.
    auto merged = backend_->load_root(p->record.root_address).value_or(RootRecord{});
    merged.root_address = p->record.root_address;
    for (const auto& e : p->record.ledgers) {
      if (merged.find(e.address) == nullptr) merged.ledgers.push_back(e);
    }
    for (const auto& [id, k] : p->record.service_provider_keys) {
      merged.service_provider_keys.insert_or_assign(id, k);
    }
    backend_->store_root(merged);
    return encode_message(Ack{});
  }
  if (auto* q = std::get_if<Query>(&msg)) return query(*q);
  return refuse(RefusalCode::unexpected_message, "storage takes CommitBlock, PutRootRecord, Query");
}

Bytes StorageService::query(const Query& q) {
  switch (q.kind) {
    case QueryKind::get_ledger: {
      auto l = backend_->load(q.address);
      if (!l) return refuse(RefusalCode::not_found, "unknown ledger: " + q.address.to_string());
      return encode_message(QueryResponse{canonical_encode(*l), std::nullopt});
    }
    case QueryKind::list_ledgers: {
      auto r = backend_->load_root(q.address);
      if (!r) return refuse(RefusalCode::not_found, "unknown root: " + q.address.to_string());
      std::vector<Address> out;
      for (const auto& e : r->ledgers) out.push_back(e.address);
      return encode_message(QueryResponse{canonical_encode(out), std::nullopt});
    }
    case QueryKind::get_root_record: {
      auto r = backend_->load_root(q.address);
      if (!r) return refuse(RefusalCode::not_found, "unknown root: " + q.address.to_string());
      return encode_message(QueryResponse{canonical_encode(*r), std::nullopt});
    }
    default:
      return refuse(RefusalCode::unexpected_message, "storage does not cut blocks");
  }
}

}  // namespace pbl::services
