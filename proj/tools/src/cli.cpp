#include "pbl/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "pbl/ledger_file.hpp"
#include "pbl/tamper.hpp"
#include "pbl/validation.hpp"

namespace pbl::cli {

namespace {

using services::ApiError;
using services::ApiErrorKind;
using services::Record;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

services::CuttingCondition parse_cut_flag(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--cut expects KIND:THRESHOLD, e.g. count:3");
  std::uint64_t threshold = 0;
  try {
    std::size_t used = 0;
    threshold = std::stoull(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw UsageError("--cut threshold must be a number");
  }
  return services::parse_cutting_condition(text.substr(0, colon), threshold);
}

std::vector<services::ProviderSpec> providers_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) {
    auto m = j.get<std::size_t>();
    if (m < 1 || m > 16) throw std::invalid_argument("providers count must be 1..16");
    return services::default_providers(m);
  }
  if (!j.is_object()) throw std::invalid_argument("providers must be a count or an object of id lists");
  std::vector<services::ProviderSpec> out;
  for (const auto& [name, ids] : j.items()) {
    auto kind = harness::parse_kind(name);
    if (!kind) throw std::invalid_argument("unknown provider kind '" + name + "'");
    if (!ids.is_array()) throw std::invalid_argument("providers." + name + " must be a list of ids");
    for (const auto& id : ids) out.push_back({*kind, id.get<std::string>()});
  }
  return out;
}

}  // namespace

CliConfig CliConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  CliConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {"storage_dir", "seed",     "rng_seed", "ttl_ms",
                                              "cut",         "providers", "format",  "clock_start"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    }
    if (j.contains("storage_dir")) {
      std::filesystem::path p = j["storage_dir"].get<std::string>();
      c.storage_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("rng_seed")) c.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("ttl_ms")) c.ttl_ms = j["ttl_ms"].get<std::int64_t>();
    if (j.contains("clock_start")) c.clock_start = j["clock_start"].get<std::int64_t>();
    if (j.contains("cut")) {
      const auto& cut = j["cut"];
      c.cut = services::parse_cutting_condition(cut.at("kind").get<std::string>(),
                                                cut.at("threshold").get<std::uint64_t>());
    }
    if (j.contains("providers")) c.providers = providers_from_json(j["providers"]);
    if (j.contains("format")) {
      auto f = j["format"].get<std::string>();
      if (f == "text") {
        c.format = Format::text;
      } else if (f == "kv") {
        c.format = Format::kv;
      } else {
        throw std::invalid_argument("format must be text or kv");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config has a field of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

void CliConfig::validate() const {
  if (ttl_ms <= 0) throw std::invalid_argument("ttl_ms must be positive");
  cut.validate();
  std::vector<harness::ProviderRecord> records;
  for (const auto& p : providers) records.push_back({p.id, p.kind, {}, {}});
  services::ProviderPool(records, 0).validate();
}

services::WorldConfig CliConfig::world() const {
  services::WorldConfig w;
  w.seed = seed;
  w.providers = providers;
  w.cut = cut;
  w.ttl_ms = ttl_ms;
  w.storage_dir = storage_dir;
  w.clock_start = clock_start.value_or(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  return w;
}

Env Env::process() {
  Env e;
  e.getenv = [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
  e.input = &std::cin;
  return e;
}

namespace {

class Printer {
 public:
  Printer(Format format, std::ostream& out) : format_(format), out_(out) {}

  void operator()(const Record& r) {
    if (format_ == Format::kv) {
      out_ << r.kv() << '\n';
      return;
    }
    const auto op = r.get("op");
    if (op == "matrix-row") {
      rows_.push_back(r);
      return;
    }
    if (op == "matrix") print_table();
    Record rest;
    for (const auto& f : r.fields) {
      if (f.first != "op") rest.fields.push_back(f);
    }
    out_ << std::left << std::setw(15) << op << rest.kv() << '\n';
  }

 private:
  void print_table() {
    out_ << "kind     healthy   runs   read_ok  (expected)  write_ok  (expected)\n";
    for (const auto& r : rows_) {
      out_ << std::left << std::setw(9) << r.get("kind") << std::setw(10) << r.get("healthy")
           << std::setw(7) << r.get("runs") << std::setw(9) << r.get("read_ok")
           << std::setw(12) << ("(" + r.get("read_expected") + ")") << std::setw(10)
           << r.get("write_ok") << "(" << r.get("write_expected") << ")\n";
    }
    rows_.clear();
  }

  Format format_;
  std::ostream& out_;
  std::vector<Record> rows_;
};

SeedPhrase read_phrase(const Env& env, std::ostream& err) {
  if (env.getenv) {
    if (auto v = env.getenv("PBL_SEED_PHRASE"); v && !v->empty()) return SeedPhrase::parse(*v);
  }
  if (env.input != nullptr) {
    err << "seed phrase: " << std::flush;
    std::string line;
    if (std::getline(*env.input, line) && !line.empty()) return SeedPhrase::parse(line);
  }
  throw UsageError("no seed phrase: set PBL_SEED_PHRASE or type it at the prompt");
}

/// One process worth of deployment plus the user agent.
struct Session {
  Session(const CliConfig& config, KeyPair root)
      : world(config.world()),
        api(world.network(),
            world.pool(config.rng_seed.value_or(SystemEntropy{}())),
            std::move(root), options(config)) {}

  static services::ApiOptions options(const CliConfig& config) {
    services::ApiOptions o;
    o.ttl_ms = config.ttl_ms;
    return o;
  }

  services::World world;
  services::LedgerApi api;
};

struct Source {
  std::optional<std::uint32_t> index;
  std::string ledger;
  std::string file;
};

struct Loaded {
  Ledger ledger;
  KeyDirectory keys;
  std::string source;
};

std::string short_hex(const Digest& d) { return d.hex().substr(0, 16); }

Loaded load(const Source& src, const CliConfig& config, const Env& env, std::ostream& err) {
  if (!src.file.empty()) {
    if (!std::filesystem::is_regular_file(src.file)) throw UsageError("no such file: " + src.file);
    auto l = parse_ledger_file(read_file(src.file));
    return {l, services::ledger_directory(l, std::nullopt), src.file};
  }
  if (!src.ledger.empty()) {
    const auto addr = [&] {
      try {
        return Address::parse(src.ledger, AddressKind::ledger);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--ledger: ") + e.what());
      }
    }();
    services::World world(config.world());
    for (const auto& id : world.ids(harness::ServiceKind::storage)) {
      if (auto l = world.storage(id).backend().load(addr)) {
        return {*l, services::ledger_directory(*l, std::nullopt), id + ":" + src.ledger};
      }
    }
    throw ApiError(ApiErrorKind::refused, "no storage provider holds " + src.ledger);
  }
  Session s(config, derive_root_keypair(read_phrase(env, err)));
  auto addr = s.api.ledger_address_for(*src.index);
  auto l = s.api.read_ledger(addr);
  std::optional<RootRecord> root;
  try {
    root = s.api.fetch_root_record();
  } catch (const ApiError&) {
  }
  return {l, services::ledger_directory(l, root), addr.to_string()};
}

void add_source_options(CLI::App* cmd, Source& src) {
  auto* grp = cmd->add_option_group("source", "which ledger");
  grp->add_option("--index", src.index, "ledger index under the seed phrase");
  grp->add_option("--ledger", src.ledger, "ledger address, read from storage");
  grp->add_option("--file", src.file, "ledger file (PBL1)");
  grp->require_option(1);
}

Record finding_record(const Finding& f) {
  Record r;
  r.add("op", "finding")
      .add("location", f.location())
      .add("condition", std::string(condition_code(f.condition)))
      .add("reason", f.reason);
  return r;
}

int cmd_keygen(std::size_t words, std::optional<std::uint64_t> entropy_seed, Printer& print) {
  SeedPhrase phrase;
  if (entropy_seed) {
    std::mt19937_64 g(*entropy_seed);
    phrase = generate_seed_phrase(words, g);
  } else {
    SystemEntropy g;
    phrase = generate_seed_phrase(words, g);
  }
  auto root = derive_root_keypair(phrase);
  Record r;
  r.add("op", "keygen")
      .add("words", std::to_string(words))
      .add("phrase", phrase.to_string())
      .add("root_address", root_address(root.public_key()).to_string());
  print(r);
  return kOk;
}

int cmd_create(const CliConfig& config, std::uint32_t index, const Env& env, std::ostream& err,
               Printer& print) {
  Session s(config, derive_root_keypair(read_phrase(env, err)));
  auto created = s.api.create_ledger(index);
  for (const auto& o : created.storage) {
    Record r;
    r.add("op", "storage").add("provider", o.provider_id).add("status", o.ok ? "ok" : "failed");
    if (!o.ok) r.add("detail", o.detail);
    print(r);
  }
  std::size_t ok = 0;
  for (const auto& o : created.storage) ok += o.ok;
  Record r;
  r.add("op", "create-ledger")
      .add("index", std::to_string(index))
      .add("address", created.ledger.ledger_address.to_string())
      .add("gba", created.gba_id)
      .add("storage_ok", std::to_string(ok) + "/" + std::to_string(created.storage.size()));
  print(r);
  return kOk;
}

int cmd_submit(const CliConfig& config, std::uint32_t index, const std::string& payload,
               const std::optional<std::string>& chaincode, std::size_t repeat, const Env& env,
               std::ostream& err, Printer& print) {
  Session s(config, derive_root_keypair(read_phrase(env, err)));
  s.api.open_ledger(index);
  const auto addr = s.api.ledger_address_for(index);
  for (std::size_t i = 0; i < repeat; ++i) {
    auto receipt = s.api.submit(addr, to_bytes(payload), chaincode);
    Record r;
    r.add("op", "submit")
        .add("output_id", short_hex(receipt.output_id))
        .add("esp", receipt.esp_id)
        .add("esp_attempts", std::to_string(receipt.esp_attempts))
        .add("osp", receipt.osp_id)
        .add("vsp", receipt.vsp_id)
        .add("commits", std::to_string(receipt.commits.size()));
    print(r);
  }
  auto events = s.api.flush(addr);
  Record r;
  r.add("op", "flush")
      .add("commits", std::to_string(events.size()))
      .add("height", std::to_string(s.api.local_ledger(addr).tip_height()));
  if (chaincode) {
    r.add("chaincode", *chaincode).add("state", to_string(s.api.committed_state(addr, *chaincode)));
  }
  print(r);
  return kOk;
}

int cmd_show(const CliConfig& config, const Source& src, const std::string& export_path,
             const Env& env, std::ostream& err, Printer& print) {
  auto loaded = load(src, config, env, err);
  const auto& l = loaded.ledger;
  std::size_t txs = 0;
  for (const auto& b : l.blocks) txs += b.transactions.size();
  Record head;
  head.add("op", "ledger")
      .add("address", l.ledger_address.to_string())
      .add("source", loaded.source)
      .add("blocks", std::to_string(l.length()))
      .add("height", std::to_string(l.tip_height()))
      .add("transactions", std::to_string(txs))
      .add("created_at", std::to_string(l.genesis.core.created_at));
  print(head);
  Record g;
  g.add("op", "block").add("height", "0").add("transactions", "0").add("chain_hash",
                                                                         short_hex(chain_hash(l.genesis)));
  print(g);
  for (const auto& b : l.blocks) {
    Record r;
    r.add("op", "block")
        .add("height", std::to_string(b.core.height))
        .add("transactions", std::to_string(b.transactions.size()))
        .add("chain_hash", short_hex(chain_hash(b)));
    print(r);
  }
  const auto* balance = chaincode::Registry::with_builtins().find("balance");
  auto replay = chaincode::replay(*balance, l);
  if (replay.transactions > 0) {
    Record r;
    r.add("op", "state").add("chaincode", "balance").add("value", to_string(replay.final_state));
    print(r);
  }
  if (!export_path.empty()) {
    write_ledger_file(export_path, l);
    Record r;
    r.add("op", "export")
        .add("path", export_path)
        .add("bytes", std::to_string(serialize_ledger_file(l).size()));
    print(r);
  }
  return kOk;
}

int report_findings(const Loaded& loaded, Printer& print) {
  auto report = validate_ledger(loaded.ledger, loaded.keys);
  auto failures = report.failures();
  Record r;
  r.add("op", "audit")
      .add("source", loaded.source)
      .add("blocks", std::to_string(loaded.ledger.length()))
      .add("checks", std::to_string(report.checks().size()))
      .add("status", failures.empty() ? "valid" : "invalid")
      .add("failures", std::to_string(failures.size()));
  if (auto first = report.first_failure()) {
    r.add("first_failure", first->location() + " " + std::string(condition_code(first->condition)));
  }
  print(r);
  for (const auto& f : failures) print(finding_record(f));
  return failures.empty() ? kOk : kValidation;
}

int cmd_audit(const CliConfig& config, const Source& src, const Env& env, std::ostream& err,
              Printer& print) {
  return report_findings(load(src, config, env, err), print);
}

int cmd_tamper(const CliConfig& config, const Source& src, std::optional<std::size_t> block,
               std::uint64_t seed, const std::string& out_path, const Env& env, std::ostream& err,
               Printer& print) {
  auto loaded = load(src, config, env, err);
  const auto& l = loaded.ledger;
  if (!validate_ledger(l, loaded.keys).ok()) {
    err << "the ledger already fails validation; run audit\n";
    return report_findings(loaded, print);
  }
  std::mt19937_64 rng(seed);
  const std::size_t target = block ? *block : (l.blocks.empty() ? 0 : 1 + uniform_below(rng, l.blocks.size()));
  if (target > l.blocks.size()) throw UsageError("--block is past the tip");
  const auto size = block_encoded_size(l, target);
  std::optional<Ledger> mutated;
  std::size_t offset = 0;
  std::uint8_t mask = 0;
  for (int attempt = 0; attempt < 100000 && !mutated; ++attempt) {
    offset = uniform_below(rng, size);
    mask = static_cast<std::uint8_t>(1U << uniform_below(rng, 8));
    mutated = mutate_block_byte(l, target, offset, mask);
  }
  if (!mutated) throw UsageError("could not find a decodable single-byte mutation");
  Record m;
  m.add("op", "mutation")
      .add("block", std::to_string(target))
      .add("offset", std::to_string(offset))
      .add("size", std::to_string(size))
      .add("xor", std::to_string(mask));
  print(m);
  if (!out_path.empty()) write_ledger_file(out_path, *mutated);
  auto findings = tamper_scan(*mutated, loaded.keys);
  for (const auto& f : findings) print(finding_record(f));
  Record r;
  r.add("op", "localized")
      .add("detected", findings.empty() ? "no" : "yes")
      .add("findings", std::to_string(findings.size()));
  if (!findings.empty()) {
    r.add("first", findings.front().location() + " " +
                       std::string(condition_code(findings.front().condition)));
  }
  print(r);
  return findings.empty() ? kValidation : kOk;
}

int cmd_simulate(const std::string& path, Printer& print) {
  auto scenario = services::Scenario::load(path);
  auto outcome = services::run_scenario(scenario, [&](const Record& r) { print(r); });
  return outcome.ok() ? kOk : kValidation;
}

int exit_for(ApiErrorKind kind) {
  switch (kind) {
    case ApiErrorKind::fault:
      return kFault;
    case ApiErrorKind::usage:
      return kUsage;
    case ApiErrorKind::refused:
    case ApiErrorKind::invalid:
      return kValidation;
  }
  return kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Env& env) {
  CLI::App app{"Personal blockchain ledger: user agent and simulator", "pbl"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, storage_dir, cut, format;
  std::optional<std::uint64_t> seed, rng_seed;
  std::optional<std::int64_t> ttl, clock_start;
  std::optional<std::size_t> providers;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--storage-dir", storage_dir, "directory holding one store per storage provider");
  app.add_option("--seed", seed, "deployment seed (provider keys)");
  app.add_option("--rng-seed", rng_seed, "provider selection seed (default: system entropy)");
  app.add_option("--ttl", ttl, "provider time-to-live in ms")->check(CLI::PositiveNumber);
  app.add_option("--cut", cut, "cutting condition KIND:THRESHOLD (count, interval, size)");
  app.add_option("--providers", providers, "providers per kind (default ids)")->check(CLI::Range(1, 16));
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"text", "kv"}));
  app.add_option("--clock-start", clock_start, "virtual clock start in ms");

  auto* keygen = app.add_subcommand("keygen", "generate a seed phrase and show its root address");
  std::size_t words = 12;
  std::optional<std::uint64_t> entropy_seed;
  keygen->add_option("--words", words, "phrase length")->check(CLI::IsMember({12, 15, 18, 21, 24}));
  keygen->add_option("--entropy-seed", entropy_seed, "deterministic entropy, for tests only");

  std::uint32_t index = 0;
  auto* create = app.add_subcommand("create-ledger", "create a ledger under the seed phrase");
  create->add_option("--index", index, "ledger index");

  auto* submit = app.add_subcommand("submit", "submit transactions and commit them");
  std::string payload;
  std::optional<std::string> chaincode_id;
  std::size_t repeat = 1;
  submit->add_option("--index", index, "ledger index");
  submit->add_option("--payload", payload, "transaction payload")->required();
  submit->add_option("--chaincode", chaincode_id, "chaincode id (balance, null)");
  submit->add_option("--repeat", repeat, "number of transactions")->check(CLI::Range(1, 100000));

  Source show_src, audit_src, tamper_src;
  auto* show = app.add_subcommand("show", "print a ledger");
  std::string export_path;
  add_source_options(show, show_src);
  show->add_option("--export", export_path, "write the ledger to a PBL1 file");

  auto* audit = app.add_subcommand("audit", "validate a ledger; exit 2 when invalid");
  add_source_options(audit, audit_src);

  auto* tamper = app.add_subcommand("tamper-demo", "mutate one byte of a copy and localize it");
  add_source_options(tamper, tamper_src);
  std::optional<std::size_t> block;
  std::uint64_t mutation_seed = 1;
  std::string tamper_out;
  tamper->add_option("--block", block, "ledger position to mutate (default: random data block)");
  tamper->add_option("--mutation-seed", mutation_seed, "seed for choosing the byte");
  tamper->add_option("--out", tamper_out, "write the mutated copy to a PBL1 file");

  auto* simulate = app.add_subcommand("simulate", "replay a scenario file");
  std::string scenario_path;
  simulate->add_option("scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    CliConfig config;
    if (!config_path.empty()) {
      config = CliConfig::from_json(to_string(read_file(config_path)),
                                    std::filesystem::path(config_path).parent_path());
    }
    if (!storage_dir.empty()) config.storage_dir = storage_dir;
    if (seed) config.seed = *seed;
    if (rng_seed) config.rng_seed = *rng_seed;
    if (ttl) config.ttl_ms = *ttl;
    if (clock_start) config.clock_start = *clock_start;
    if (!cut.empty()) config.cut = parse_cut_flag(cut);
    if (providers) config.providers = services::default_providers(*providers);
    if (format == "kv") config.format = Format::kv;
    if (format == "text") config.format = Format::text;
    config.validate();

    Printer print(config.format, out);
    if (*keygen) return cmd_keygen(words, entropy_seed, print);
    if (*create) return cmd_create(config, index, env, err, print);
    if (*submit) return cmd_submit(config, index, payload, chaincode_id, repeat, env, err, print);
    if (*show) return cmd_show(config, show_src, export_path, env, err, print);
    if (*audit) return cmd_audit(config, audit_src, env, err, print);
    if (*tamper) {
      return cmd_tamper(config, tamper_src, block, mutation_seed, tamper_out, env, err, print);
    }
    if (*simulate) return cmd_simulate(scenario_path, print);
    return kUsage;
  } catch (const ApiError& e) {
    err << "error: " << e.what() << '\n';
    return exit_for(e.kind());
  } catch (const services::ScenarioError& e) {
    err << "error: " << scenario_path << ": " << e.what() << '\n';
    return kUsage;
  } catch (const DecodeError& e) {
    err << "error: malformed ledger data: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFault;
  }
}

}  // namespace pbl::cli
