#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pbl/services/scenario.hpp"

namespace pbl::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kFault = 3, kUsage = 4 };

enum class Format { text, kv };

struct CliConfig {
  std::filesystem::path storage_dir = "pbl-data";
  /// Deployment seed: provider keys derive from it.
  std::uint64_t seed = 1;
  /// Provider selection seed; system entropy when unset.
  std::optional<std::uint64_t> rng_seed;
  std::int64_t ttl_ms = harness::kDefaultTtlMs;
  services::CuttingCondition cut = services::CuttingCondition::count(3);
  std::vector<services::ProviderSpec> providers = services::default_providers(3);
  Format format = Format::text;
  /// Virtual clock start; wall-clock milliseconds when unset.
  std::optional<std::int64_t> clock_start;

  /// JSON document (see docs/config.md). Relative storage paths resolve
  /// against `base_dir`. Throws std::invalid_argument.
  static CliConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  /// Throws std::invalid_argument for an empty provider kind or duplicate id.
  void validate() const;
  services::WorldConfig world() const;
};

struct Env {
  /// Environment lookup; PBL_SEED_PHRASE is the only variable read.
  std::function<std::optional<std::string>(const std::string&)> getenv;
  /// Where the seed phrase prompt reads from; nullptr disables prompting.
  std::istream* input = nullptr;

  static Env process();
};

/// Everything `pbl` does, minus process plumbing. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Env& env);

}  // namespace pbl::cli
