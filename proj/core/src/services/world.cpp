#include "pbl/services/world.hpp"

namespace pbl::services {

std::vector<ProviderSpec> default_providers(std::size_t m) {
  std::vector<ProviderSpec> out;
  for (auto kind : kAllKinds) {
    for (std::size_t i = 1; i <= m; ++i) {
      out.push_back({kind, std::string(harness::kind_name(kind)) + std::to_string(i)});
    }
  }
  return out;
}

KeyPair provider_key(std::uint64_t seed, std::string_view provider_id) {
  auto material = to_bytes("pbl-provider:" + std::to_string(seed) + ":" + std::string(provider_id));
  return KeyPair::from_seed(sha256(material).view());
}

World::World(WorldConfig config)
    : config_(std::move(config)),
      clock_(config_.clock_start),
      network_(clock_, corrupt_signatures) {
  config_.cut.validate();
  if (config_.ttl_ms <= 0) throw std::invalid_argument("ttl must be positive");
  for (const auto& spec : config_.providers) {
    auto known = config_.keys.find(spec.id);
    auto key = known != config_.keys.end() ? known->second : provider_key(config_.seed, spec.id);
    std::unique_ptr<Service> svc;
    switch (spec.kind) {
      case ServiceKind::gba:
        svc = std::make_unique<GenesisAuthority>(spec.id, key, clock_, config_.kyc);
        break;
      case ServiceKind::esp:
        svc = std::make_unique<ExecutingService>(spec.id, key, network_,
                                                 chaincode::Registry::with_builtins(),
                                                 config_.ttl_ms);
        break;
      case ServiceKind::osp:
        svc = std::make_unique<OrderingService>(spec.id, key, network_, config_.cut, config_.ttl_ms);
        break;
      case ServiceKind::vsp:
        svc = std::make_unique<ValidationService>(spec.id, key);
        break;
      case ServiceKind::storage: {
        std::unique_ptr<StorageBackend> backend;
        if (config_.storage_dir) {
          backend = std::make_unique<FileStore>(*config_.storage_dir / spec.id);
        } else {
          backend = std::make_unique<MemoryStore>();
        }
        svc = std::make_unique<StorageService>(spec.id, key, std::move(backend));
        break;
      }
    }
    ProviderRecord record{spec.id, spec.kind, key.public_key(), "sim://" + spec.id};
    network_.register_provider(record, svc->handler());
    records_.push_back(record);
    services_.emplace(spec.id, std::move(svc));
  }
}

std::vector<std::string> World::ids(ServiceKind kind) const {
  std::vector<std::string> out;
  for (const auto& r : records_) {
    if (r.kind == kind) out.push_back(r.provider_id);
  }
  return out;
}

ProviderPool World::pool(std::uint64_t seed) const { return ProviderPool(records_, seed); }

Service& World::service(std::string_view id) {
  auto it = services_.find(id);
  if (it == services_.end()) throw harness::HarnessError("unknown provider " + std::string(id));
  return *it->second;
}

LedgerApi World::agent(const SeedPhrase& phrase, ApiOptions options) {
  return agent(derive_root_keypair(phrase), std::move(options));
}

LedgerApi World::agent(KeyPair root, ApiOptions options) {
  options.ttl_ms = config_.ttl_ms;
  return LedgerApi(network_, pool(), std::move(root), std::move(options));
}

void World::heal_all() {
  for (const auto& r : records_) network_.heal(r.provider_id);
}

}  // namespace pbl::services
