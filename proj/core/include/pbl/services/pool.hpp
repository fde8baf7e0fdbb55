#pragma once

#include <random>
#include <set>

#include "pbl/harness.hpp"

namespace pbl::services {

using harness::ProviderRecord;
using harness::ServiceKind;

inline constexpr ServiceKind kAllKinds[] = {ServiceKind::gba, ServiceKind::esp, ServiceKind::osp,
                                            ServiceKind::vsp, ServiceKind::storage};

/// The user's trusted providers per kind, with a seeded generator so provider
/// selection is reproducible.
class ProviderPool {
 public:
  ProviderPool(std::vector<ProviderRecord> records, std::uint64_t seed);

  /// Throws std::invalid_argument if a kind has no provider or an id repeats.
  void validate() const;

  const std::vector<ProviderRecord>& of(ServiceKind kind) const;
  const ProviderRecord* find(std::string_view id) const;
  std::size_t size(ServiceKind kind) const { return of(kind).size(); }
  std::uint64_t seed() const { return seed_; }

  /// Uniform draw among the providers of `kind` not in `excluded`.
  std::optional<ProviderRecord> draw(ServiceKind kind, const std::set<std::string>& excluded = {});

 private:
  std::map<ServiceKind, std::vector<ProviderRecord>> by_kind_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

/// Providers fixed for the block being built.
struct RoundState {
  std::string current_vsp;
  std::string current_osp;
  std::uint64_t established_at_height = 0;
  friend bool operator==(const RoundState&, const RoundState&) = default;
};

}  // namespace pbl::services
