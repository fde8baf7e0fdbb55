#pragma once

#include <filesystem>
#include <map>
#include <mutex>

#include "pbl/services/providers.hpp"

namespace pbl::services {

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw persistence, no validation. Implementations must append durably and
/// return byte-identical blocks.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;
  virtual bool contains(const Address& ledger) const = 0;
  virtual std::optional<Ledger> load(const Address& ledger) const = 0;
  /// Tip summary without loading every block: (chain hash, height).
  virtual std::optional<std::pair<Digest, std::uint64_t>> tip(const Address& ledger) const = 0;
  virtual std::optional<PublicKey> owner(const Address& ledger) const = 0;
  virtual void create(const Address& ledger, const GenesisBlock& genesis) = 0;
  virtual void append(const Address& ledger, const DataBlock& block) = 0;
  virtual std::optional<RootRecord> load_root(const Address& root) const = 0;
  virtual void store_root(const RootRecord& record) = 0;
  virtual std::vector<Address> ledgers() const = 0;
};

class MemoryStore final : public StorageBackend {
 public:
  bool contains(const Address& ledger) const override;
  std::optional<Ledger> load(const Address& ledger) const override;
  std::optional<std::pair<Digest, std::uint64_t>> tip(const Address& ledger) const override;
  std::optional<PublicKey> owner(const Address& ledger) const override;
  void create(const Address& ledger, const GenesisBlock& genesis) override;
  void append(const Address& ledger, const DataBlock& block) override;
  std::optional<RootRecord> load_root(const Address& root) const override;
  void store_root(const RootRecord& record) override;
  std::vector<Address> ledgers() const override;

  /// Copy of the whole store, for resetting between experiment runs.
  struct Snapshot {
    std::map<Address, Ledger> ledgers;
    std::map<Address, RootRecord> roots;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  mutable std::mutex mutex_;
  std::map<Address, Ledger> ledgers_;
  std::map<Address, RootRecord> roots_;
};

/// One directory per store: `<ledger>.blocks` holds framed blocks (genesis
/// first) and is only ever appended to; `<root>.root` holds the RootRecord
/// and is replaced atomically.
class FileStore final : public StorageBackend {
 public:
  explicit FileStore(std::filesystem::path dir);
  const std::filesystem::path& directory() const { return dir_; }

  bool contains(const Address& ledger) const override;
  std::optional<Ledger> load(const Address& ledger) const override;
  std::optional<std::pair<Digest, std::uint64_t>> tip(const Address& ledger) const override;
  std::optional<PublicKey> owner(const Address& ledger) const override;
  void create(const Address& ledger, const GenesisBlock& genesis) override;
  void append(const Address& ledger, const DataBlock& block) override;
  std::optional<RootRecord> load_root(const Address& root) const override;
  void store_root(const RootRecord& record) override;
  std::vector<Address> ledgers() const override;

 private:
  std::filesystem::path blocks_path(const Address& a) const;
  std::filesystem::path root_path(const Address& a) const;
  void append_frame(const Address& ledger, ByteView body, bool create);

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  // Tip cache so commits do not re-read the whole file.
  mutable std::map<Address, std::pair<Digest, std::uint64_t>> tips_;
  mutable std::map<Address, std::optional<PublicKey>> owners_;
};

/// Storage provider: accepts only blocks that extend the stored tip and carry
/// the owner's signature, so every stored ledger is a single chain.
class StorageService final : public Service {
 public:
  StorageService(std::string id, KeyPair key, std::unique_ptr<StorageBackend> backend);
  StorageBackend& backend() { return *backend_; }
  const StorageBackend& backend() const { return *backend_; }

  /// The checks behind CommitBlock, callable directly.
  std::optional<Refusal> put_genesis(const Address& ledger, const GenesisBlock& genesis);
  std::optional<Refusal> put_block(const Address& ledger, const DataBlock& block);

 protected:
  Bytes dispatch(std::string_view from, Message&& msg) override;

 private:
  Bytes query(const Query& q);

  std::unique_ptr<StorageBackend> backend_;
  LedgerLocks locks_;
};

}  // namespace pbl::services
