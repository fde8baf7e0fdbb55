#pragma once

// A complete simulated deployment: virtual clock, network, one instance of
// every configured provider, and a factory for user agents.

#include <filesystem>

#include "pbl/services/ledger_api.hpp"
#include "pbl/services/providers.hpp"
#include "pbl/services/storage.hpp"

namespace pbl::services {

struct ProviderSpec {
  ServiceKind kind = ServiceKind::esp;
  std::string id;
  friend bool operator==(const ProviderSpec&, const ProviderSpec&) = default;
};

/// m providers of each kind: gba1..gbaM, esp1.., osp.., vsp.., storage1..
std::vector<ProviderSpec> default_providers(std::size_t m);

/// Deterministic provider key, so separate processes agree on provider keys.
KeyPair provider_key(std::uint64_t seed, std::string_view provider_id);

struct WorldConfig {
  std::uint64_t seed = 1;
  std::vector<ProviderSpec> providers = default_providers(3);
  CuttingCondition cut = CuttingCondition::count(3);
  std::int64_t ttl_ms = harness::kDefaultTtlMs;
  /// File-backed storage under <dir>/<provider id> when set, memory otherwise.
  std::optional<std::filesystem::path> storage_dir;
  KycPolicy kyc;
  std::int64_t clock_start = 0;
  /// Pre-derived provider keys by id; anything missing uses provider_key().
  std::map<std::string, KeyPair> keys;
};

class World {
 public:
  explicit World(WorldConfig config);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const WorldConfig& config() const { return config_; }
  harness::VirtualClock& clock() { return clock_; }
  harness::Network& network() { return network_; }

  std::vector<ProviderRecord> records() const { return records_; }
  std::vector<std::string> ids(ServiceKind kind) const;
  /// Pool over every provider, seeded with `seed` (default: the world seed).
  ProviderPool pool() const { return pool(config_.seed); }
  ProviderPool pool(std::uint64_t seed) const;

  Service& service(std::string_view id);
  template <typename T>
  T& as(std::string_view id) {
    auto* p = dynamic_cast<T*>(&service(id));
    if (p == nullptr) throw harness::HarnessError("provider " + std::string(id) + " has another kind");
    return *p;
  }
  StorageService& storage(std::string_view id) { return as<StorageService>(id); }

  LedgerApi agent(const SeedPhrase& phrase, ApiOptions options = {});
  LedgerApi agent(KeyPair root, ApiOptions options = {});

  void inject(std::string_view id, harness::FaultProgram p) { network_.inject(id, p); }
  void heal(std::string_view id) { network_.heal(id); }
  void heal_all();

 private:
  WorldConfig config_;
  harness::VirtualClock clock_;
  harness::Network network_;
  std::vector<ProviderRecord> records_;
  std::map<std::string, std::unique_ptr<Service>, std::less<>> services_;
};

}  // namespace pbl::services
