#include "pbl/services/pool.hpp"

#include "pbl/random.hpp"

namespace pbl::services {

ProviderPool::ProviderPool(std::vector<ProviderRecord> records, std::uint64_t seed)
    : seed_(seed), rng_(seed) {
  for (auto kind : kAllKinds) by_kind_[kind];
  for (auto& r : records) by_kind_[r.kind].push_back(std::move(r));
}

void ProviderPool::validate() const {
  std::set<std::string> ids;
  for (const auto& [kind, list] : by_kind_) {
    if (list.empty()) {
      throw std::invalid_argument("provider pool has no " + std::string(harness::kind_name(kind)));
    }
    for (const auto& r : list) {
      if (!ids.insert(r.provider_id).second) {
        throw std::invalid_argument("duplicate provider id " + r.provider_id);
      }
    }
  }
}

const std::vector<ProviderRecord>& ProviderPool::of(ServiceKind kind) const {
  return by_kind_.at(kind);
}

const ProviderRecord* ProviderPool::find(std::string_view id) const {
  for (const auto& [kind, list] : by_kind_) {
    for (const auto& r : list) {
      if (r.provider_id == id) return &r;
    }
  }
  return nullptr;
}

std::optional<ProviderRecord> ProviderPool::draw(ServiceKind kind,
                                                 const std::set<std::string>& excluded) {
  std::vector<const ProviderRecord*> open;
  for (const auto& r : of(kind)) {
    if (!excluded.contains(r.provider_id)) open.push_back(&r);
  }
  if (open.empty()) return std::nullopt;
  return *open[uniform_below(rng_, open.size())];
}

}  // namespace pbl::services
