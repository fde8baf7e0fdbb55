#include "pbl/services/matrix.hpp"

#include <atomic>
#include <random>
#include <thread>

#include "pbl/ledger_file.hpp"
#include "pbl/validation.hpp"

namespace pbl::services {

KeyDirectory ledger_directory(const Ledger& ledger, const std::optional<RootRecord>& root) {
  auto dir = KeyDirectory::from_genesis(ledger.genesis);
  if (root) dir.merge(root->provider_directory());
  return dir;
}

bool MatrixReport::expected_read(const MatrixRun& r) {
  return r.healthy[static_cast<std::size_t>(ServiceKind::storage)] >= 1;
}

bool MatrixReport::expected_write(const MatrixRun& r) {
  for (auto h : r.healthy) {
    if (h == 0) return false;
  }
  return true;
}

std::size_t MatrixReport::read_ok() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const MatrixRun& r) { return r.read_ok; }));
}

std::size_t MatrixReport::write_ok() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const MatrixRun& r) { return r.write_ok; }));
}

std::size_t MatrixReport::read_mismatches() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const MatrixRun& r) {
    return r.read_ok != expected_read(r);
  }));
}

std::size_t MatrixReport::write_mismatches() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const MatrixRun& r) {
    if (r.write_ok != expected_write(r)) return true;
    return !r.write_ok && r.write_error_kind != ApiErrorKind::fault;
  }));
}

std::size_t MatrixReport::invalid_ledgers() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.invalid_ledgers;
  return n;
}

bool MatrixReport::matches() const {
  return !runs.empty() && read_mismatches() == 0 && write_mismatches() == 0 &&
         invalid_ledgers() == 0;
}

namespace {

struct Base {
  KeyPair root;
  Address ledger;
  std::vector<MemoryStore::Snapshot> stores;  // one per storage provider, in id order
};

WorldConfig world_config(const MatrixOptions& o, const std::vector<ProviderSpec>& specs) {
  WorldConfig cfg;
  cfg.seed = o.seed;
  cfg.providers = specs;
  cfg.cut = CuttingCondition::count(1);
  cfg.ttl_ms = o.ttl_ms;
  for (const auto& spec : specs) cfg.keys.emplace(spec.id, provider_key(o.seed, spec.id));
  return cfg;
}

ApiOptions api_options(const MatrixOptions& o) {
  ApiOptions opts;
  opts.ttl_ms = o.ttl_ms;
  return opts;
}

Base build_base(const MatrixOptions& o, const std::vector<ProviderSpec>& specs) {
  std::mt19937_64 entropy(o.phrase_seed);
  auto root = derive_root_keypair(generate_seed_phrase(12, entropy));
  World world(world_config(o, specs));
  LedgerApi api(world.network(), world.pool(), root, api_options(o));
  auto created = api.create_ledger(0);
  for (std::size_t i = 0; i < o.base_blocks; ++i) {
    api.submit(created.ledger.ledger_address, to_bytes(std::to_string(i + 1)), std::string("balance"));
  }
  Base base{root, created.ledger.ledger_address, {}};
  for (const auto& id : world.ids(ServiceKind::storage)) {
    base.stores.push_back(dynamic_cast<MemoryStore&>(world.storage(id).backend()).snapshot());
  }
  return base;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fingerprints of (ledger, root record) pairs already known to validate.
class VerifiedCache {
 public:
  bool contains(const Digest& d) const {
    std::lock_guard lock(mutex_);
    return good_.contains(d);
  }
  void insert(const Digest& d) {
    std::lock_guard lock(mutex_);
    good_.insert(d);
  }

 private:
  mutable std::mutex mutex_;
  std::set<Digest> good_;
};

// Every ledger any storage provider holds must validate and be one chain.
std::size_t count_invalid(World& world, const Address& root_address, VerifiedCache& cache) {
  std::size_t bad = 0;
  for (const auto& id : world.ids(ServiceKind::storage)) {
    const auto& backend = world.storage(id).backend();
    auto root = backend.load_root(root_address);
    for (const auto& addr : backend.ledgers()) {
      auto ledger = backend.load(addr);
      if (!ledger) {
        ++bad;
        continue;
      }
      auto material = serialize_ledger_file(*ledger);
      if (root) append(material, canonical_encode(*root));
      auto fingerprint = sha256(material);
      if (cache.contains(fingerprint)) continue;
      bool chain = true;
      for (std::size_t i = 0; i < ledger->blocks.size(); ++i) {
        if (ledger->blocks[i].core.height != i + 1) chain = false;
      }
      if (!chain || !validate_ledger(*ledger, ledger_directory(*ledger, root)).ok()) {
        ++bad;
      } else {
        cache.insert(fingerprint);
      }
    }
  }
  return bad;
}

MatrixRun run_one(const MatrixOptions& o, const WorldConfig& config, const Base& base,
                  std::uint64_t mask, VerifiedCache& cache) {
  MatrixRun run;
  run.mask = mask;
  const auto& specs = config.providers;
  World world(config);
  auto storage_ids = world.ids(ServiceKind::storage);
  for (std::size_t i = 0; i < storage_ids.size(); ++i) {
    dynamic_cast<MemoryStore&>(world.storage(storage_ids[i]).backend()).restore(base.stores[i]);
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if ((mask >> i) & 1U) {
      world.inject(specs[i].id, harness::FaultProgram::silent());
    } else {
      ++run.healthy[static_cast<std::size_t>(specs[i].kind)];
    }
  }
  LedgerApi api(world.network(), world.pool(mix(o.seed ^ mix(mask))), base.root, api_options(o));

  try {
    auto ledger = api.read_ledger(base.ledger);
    auto report = validate_ledger(ledger, ledger_directory(ledger, api.fetch_root_record()));
    run.read_ok = report.ok() && ledger.blocks.size() == o.base_blocks;
    if (!run.read_ok) run.read_error = report.summary();
  } catch (const ApiError& e) {
    run.read_error = e.what();
  }

  try {
    auto created = api.create_ledger(1);
    auto receipt = api.submit(created.ledger.ledger_address, to_bytes("7"), std::string("balance"));
    run.write_ok = !receipt.commits.empty();
    if (!run.write_ok) {
      run.write_error = "transaction accepted but no block committed";
      run.write_error_kind = ApiErrorKind::invalid;
    }
  } catch (const ApiError& e) {
    run.write_error = e.what();
    run.write_error_kind = e.kind();
  }

  run.invalid_ledgers = count_invalid(world, api.root_address(), cache);
  return run;
}

}  // namespace

MatrixReport run_fault_matrix(const MatrixOptions& options,
                              std::function<void(std::size_t, std::size_t)> progress) {
  if (options.m < 1 || options.m > 4) throw std::invalid_argument("matrix m must be 1..4");
  MatrixReport report;
  report.options = options;
  report.providers = default_providers(options.m);
  const auto base = build_base(options, report.providers);
  const auto config = world_config(options, report.providers);
  const std::uint64_t total = std::uint64_t{1} << report.providers.size();
  report.runs.resize(total);

  std::size_t threads = options.threads;
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<std::size_t>(threads, total);
  VerifiedCache cache;
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      for (auto mask = next++; mask < total; mask = next++) {
        report.runs[mask] = run_one(options, config, base, mask, cache);
        auto d = ++done;
        if (progress) progress(d, total);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = total;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return report;
}

}  // namespace pbl::services
