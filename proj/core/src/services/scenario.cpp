#include "pbl/services/scenario.hpp"

#include <charconv>
#include <random>
#include <sstream>

#include "pbl/ledger_file.hpp"
#include "pbl/validation.hpp"

namespace pbl::services {

CuttingCondition parse_cutting_condition(std::string_view kind, std::uint64_t threshold) {
  CuttingCondition c;
  if (kind == "count") {
    c = CuttingCondition::count(threshold);
  } else if (kind == "interval") {
    c = CuttingCondition::interval_ms(threshold);
  } else if (kind == "size") {
    c = CuttingCondition::size(threshold);
  } else {
    throw std::invalid_argument("unknown cutting condition '" + std::string(kind) +
                                "' (count, interval, size)");
  }
  c.validate();
  return c;
}

Record& Record::add(std::string key, std::string value) {
  fields.emplace_back(std::move(key), std::move(value));
  return *this;
}

std::string Record::get(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  return {};
}

std::string Record::kv() const {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out += ' ';
    out += k;
    out += '=';
    if (v.empty() || v.find_first_of(" \t\"") != std::string::npos) {
      out += '"';
      for (char c : v) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
    } else {
      out += v;
    }
  }
  return out;
}

bool ScenarioOutcome::ok() const {
  if (expectation_failures != 0) return false;
  for (const auto& m : matrices) {
    if (!m.matches()) return false;
  }
  return true;
}

namespace {

const std::set<std::string, std::less<>> kHeader = {"seed",      "ttl",      "cut",
                                                    "providers", "provider", "phrase-seed"};
const std::set<std::string, std::less<>> kStatuses = {"ok",      "fail",    "fault",
                                                      "refused", "invalid", "usage"};

std::vector<std::string> tokenize(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::uint64_t number(const ScenarioStep& s, std::size_t i, std::string_view what) {
  if (i >= s.args.size()) throw ScenarioError(s.line, s.op + ": missing " + std::string(what));
  const auto& text = s.args[i];
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ScenarioError(s.line, s.op + ": " + std::string(what) + " '" + text + "' is not a number");
  }
  return v;
}

void arity(const ScenarioStep& s, std::size_t lo, std::size_t hi) {
  if (s.args.size() < lo || s.args.size() > hi) {
    throw ScenarioError(s.line, s.op + ": wrong number of arguments");
  }
}

struct FaultSpec {
  std::vector<std::string> targets;
  harness::FaultProgram program;
};

// TARGET is a provider id, `@kind` for every provider of a kind, or `all`.
std::vector<std::string> targets(const ScenarioStep& s, const std::string& target,
                                 const std::vector<ProviderSpec>& providers) {
  std::vector<std::string> out;
  if (target == "all") {
    for (const auto& p : providers) out.push_back(p.id);
  } else if (target.starts_with('@')) {
    auto kind = harness::parse_kind(std::string_view(target).substr(1));
    if (!kind) throw ScenarioError(s.line, "unknown provider kind '" + target.substr(1) + "'");
    for (const auto& p : providers) {
      if (p.kind == *kind) out.push_back(p.id);
    }
  } else {
    for (const auto& p : providers) {
      if (p.id == target) out.push_back(p.id);
    }
  }
  if (out.empty()) throw ScenarioError(s.line, "no provider matches '" + target + "'");
  return out;
}

FaultSpec parse_fault(const ScenarioStep& s, const std::vector<ProviderSpec>& providers) {
  if (s.args.size() < 2) throw ScenarioError(s.line, "fault: expected TARGET MODE");
  FaultSpec f;
  f.targets = targets(s, s.args[0], providers);
  std::size_t i = 2;
  const auto& mode = s.args[1];
  if (mode == "silent") {
    f.program = harness::FaultProgram::silent();
  } else if (mode == "corrupt") {
    f.program = harness::FaultProgram::corrupt();
  } else if (mode == "delayed") {
    f.program = harness::FaultProgram::delayed(static_cast<std::int64_t>(number(s, 2, "delay")));
    i = 3;
  } else {
    throw ScenarioError(s.line, "fault: unknown mode '" + mode + "' (silent, delayed, corrupt)");
  }
  if (i < s.args.size()) {
    if (s.args[i] != "window" || s.args.size() != i + 3) {
      throw ScenarioError(s.line, "fault: trailing arguments must be 'window START END'");
    }
    auto start = static_cast<std::int64_t>(number(s, i + 1, "window start"));
    auto end = static_cast<std::int64_t>(number(s, i + 2, "window end"));
    if (end <= start) throw ScenarioError(s.line, "fault: window end must exceed start");
    f.program.window = std::make_pair(start, end);
  }
  return f;
}

struct SubmitSpec {
  std::uint32_t index = 0;
  std::string payload;
  std::optional<std::string> chaincode;
  std::uint64_t times = 1;
};

SubmitSpec parse_submit(const ScenarioStep& s) {
  if (s.args.size() < 2) throw ScenarioError(s.line, "submit: expected INDEX PAYLOAD");
  SubmitSpec sub;
  sub.index = static_cast<std::uint32_t>(number(s, 0, "ledger index"));
  sub.payload = s.args[1];
  for (std::size_t i = 2; i < s.args.size(); i += 2) {
    if (i + 1 >= s.args.size()) throw ScenarioError(s.line, "submit: '" + s.args[i] + "' needs a value");
    if (s.args[i] == "chaincode") {
      sub.chaincode = s.args[i + 1];
    } else if (s.args[i] == "times") {
      sub.times = number(s, i + 1, "times");
      if (sub.times == 0) throw ScenarioError(s.line, "submit: times must be positive");
    } else {
      throw ScenarioError(s.line, "submit: unknown option '" + s.args[i] + "'");
    }
  }
  return sub;
}

void check_pool(const std::vector<ProviderSpec>& providers) {
  std::set<std::string> ids;
  std::set<ServiceKind> kinds;
  for (const auto& p : providers) {
    if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate provider id " + p.id);
    kinds.insert(p.kind);
  }
  for (auto kind : kAllKinds) {
    if (!kinds.contains(kind)) {
      throw std::invalid_argument("provider pool has no " + std::string(harness::kind_name(kind)));
    }
  }
}

void check_workload(const ScenarioStep& s, const std::vector<ProviderSpec>& providers) {
  const auto& op = s.op;
  if (op == "at" || op == "advance") {
    arity(s, 1, 1);
    number(s, 0, "time");
  } else if (op == "fault") {
    parse_fault(s, providers);
  } else if (op == "heal") {
    arity(s, 1, 1);
    targets(s, s.args[0], providers);
  } else if (op == "create" || op == "flush" || op == "poll" || op == "read" || op == "audit" ||
             op == "retry") {
    arity(s, 1, 1);
    number(s, 0, "ledger index");
  } else if (op == "submit") {
    parse_submit(s);
  } else if (op == "expect") {
    arity(s, 1, 1);
    if (!kStatuses.contains(s.args[0])) {
      throw ScenarioError(s.line, "expect: unknown status '" + s.args[0] + "'");
    }
  } else if (op == "matrix") {
    arity(s, 0, 1);
    if (!s.args.empty()) {
      auto m = number(s, 0, "m");
      if (m < 1 || m > 4) throw ScenarioError(s.line, "matrix: m must be 1..4");
    }
  } else {
    throw ScenarioError(s.line, "unknown directive '" + op + "'");
  }
}

}  // namespace

Scenario Scenario::parse(std::string_view text) {
  Scenario sc;
  std::vector<ProviderSpec> explicit_providers;
  bool counted = false;
  bool workload = false;
  std::size_t line_no = 0;
  std::size_t last_header_line = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    ScenarioStep step{line_no, tokens[0], {tokens.begin() + 1, tokens.end()}};
    if (!kHeader.contains(step.op)) {
      workload = true;
      sc.steps.push_back(std::move(step));
      continue;
    }
    if (workload) throw ScenarioError(line_no, step.op + " must come before the workload");
    last_header_line = line_no;
    try {
      if (step.op == "seed") {
        arity(step, 1, 1);
        sc.world.seed = number(step, 0, "seed");
      } else if (step.op == "phrase-seed") {
        arity(step, 1, 1);
        sc.phrase_seed = number(step, 0, "seed");
      } else if (step.op == "ttl") {
        arity(step, 1, 1);
        auto ttl = number(step, 0, "ttl");
        if (ttl == 0) throw ScenarioError(line_no, "ttl must be positive");
        sc.world.ttl_ms = static_cast<std::int64_t>(ttl);
      } else if (step.op == "cut") {
        arity(step, 2, 2);
        sc.world.cut = parse_cutting_condition(step.args[0], number(step, 1, "threshold"));
      } else if (step.op == "providers") {
        arity(step, 1, 1);
        auto m = number(step, 0, "count");
        if (m < 1 || m > 16) throw ScenarioError(line_no, "providers: count must be 1..16");
        sc.world.providers = default_providers(m);
        counted = true;
      } else if (step.op == "provider") {
        arity(step, 2, 2);
        auto kind = harness::parse_kind(step.args[0]);
        if (!kind) throw ScenarioError(line_no, "unknown provider kind '" + step.args[0] + "'");
        explicit_providers.push_back({*kind, step.args[1]});
      }
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(line_no, e.what());
    }
  }
  if (!explicit_providers.empty()) {
    if (counted) throw ScenarioError(last_header_line, "use either 'providers' or 'provider' lines");
    sc.world.providers = explicit_providers;
  }
  try {
    check_pool(sc.world.providers);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(last_header_line, e.what());
  }
  for (const auto& step : sc.steps) check_workload(step, sc.world.providers);
  return sc;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse(to_string(bytes));
}

std::vector<Record> matrix_records(const MatrixReport& report) {
  std::vector<Record> out;
  const auto m = report.options.m;
  for (auto kind : kAllKinds) {
    const auto k = static_cast<std::size_t>(kind);
    for (std::size_t h = 0; h <= m; ++h) {
      std::size_t runs = 0, read = 0, write = 0, exp_read = 0, exp_write = 0;
      for (const auto& r : report.runs) {
        if (r.healthy[k] != h) continue;
        ++runs;
        read += r.read_ok;
        write += r.write_ok;
        exp_read += MatrixReport::expected_read(r);
        exp_write += MatrixReport::expected_write(r);
      }
      Record rec;
      rec.add("op", "matrix-row")
          .add("kind", std::string(harness::kind_name(kind)))
          .add("healthy", std::to_string(h))
          .add("runs", std::to_string(runs))
          .add("read_ok", std::to_string(read))
          .add("read_expected", std::to_string(exp_read))
          .add("write_ok", std::to_string(write))
          .add("write_expected", std::to_string(exp_write));
      out.push_back(std::move(rec));
    }
  }
  Record summary;
  summary.add("op", "matrix")
      .add("m", std::to_string(m))
      .add("runs", std::to_string(report.runs.size()))
      .add("read_ok", std::to_string(report.read_ok()))
      .add("write_ok", std::to_string(report.write_ok()))
      .add("read_mismatches", std::to_string(report.read_mismatches()))
      .add("write_mismatches", std::to_string(report.write_mismatches()))
      .add("invalid_ledgers", std::to_string(report.invalid_ledgers()))
      .add("verdict", report.matches() ? "match" : "mismatch");
  out.push_back(std::move(summary));
  return out;
}

namespace {

std::string storage_summary(const std::vector<StorageOutcome>& outcomes) {
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += o.ok;
  return std::to_string(ok) + "/" + std::to_string(outcomes.size());
}

class Runner {
 public:
  Runner(const Scenario& sc, const std::function<void(const Record&)>& sink)
      : sc_(sc), sink_(sink), world_(sc.world), api_(make_api()) {}

  ScenarioOutcome run() {
    Record head;
    head.add("op", "world")
        .add("seed", std::to_string(sc_.world.seed))
        .add("providers", std::to_string(sc_.world.providers.size()))
        .add("cut", sc_.world.cut.to_string())
        .add("ttl_ms", std::to_string(sc_.world.ttl_ms))
        .add("root", api_.root_address().to_string());
    emit(std::move(head));
    for (const auto& step : sc_.steps) execute(step);
    Record tail;
    tail.add("op", "summary")
        .add("steps", std::to_string(sc_.steps.size()))
        .add("expectations", std::to_string(out_.expectations))
        .add("expectation_failures", std::to_string(out_.expectation_failures))
        .add("verdict", out_.ok() ? "pass" : "fail");
    emit(std::move(tail));
    return std::move(out_);
  }

 private:
  LedgerApi make_api() {
    std::mt19937_64 entropy(sc_.phrase_seed);
    ApiOptions opts;
    opts.ttl_ms = sc_.world.ttl_ms;
    return LedgerApi(world_.network(), world_.pool(),
                     derive_root_keypair(generate_seed_phrase(12, entropy)), opts);
  }

  void emit(Record r) {
    if (sink_) sink_(r);
    out_.records.push_back(std::move(r));
  }

  Address ledger(const ScenarioStep& s) {
    return api_.ledger_address_for(static_cast<std::uint32_t>(number(s, 0, "ledger index")));
  }

  void execute(const ScenarioStep& s) {
    if (s.op == "expect") {
      ++out_.expectations;
      const auto& want = s.args[0];
      bool met = last_status_ && (want == *last_status_ || (want == "fail" && *last_status_ != "ok"));
      if (!met) ++out_.expectation_failures;
      Record r;
      r.add("line", std::to_string(s.line))
          .add("op", "expect")
          .add("want", want)
          .add("got", last_status_.value_or("none"))
          .add("status", met ? "met" : "unmet");
      emit(std::move(r));
      return;
    }
    if (s.op == "matrix") {
      MatrixOptions o;
      o.m = s.args.empty() ? 3 : number(s, 0, "m");
      o.seed = sc_.world.seed;
      o.ttl_ms = sc_.world.ttl_ms;
      o.phrase_seed = sc_.phrase_seed;
      auto report = run_fault_matrix(o);
      for (auto& rec : matrix_records(report)) {
        rec.fields.insert(rec.fields.begin(), {"line", std::to_string(s.line)});
        emit(std::move(rec));
      }
      last_status_ = report.matches() ? "ok" : "invalid";
      out_.matrices.push_back(std::move(report));
      return;
    }
    if (s.op == "submit") {
      auto sub = parse_submit(s);
      for (std::uint64_t i = 0; i < sub.times; ++i) {
        attempt(s, [&](Record& r) {
          r.add("ledger", std::to_string(sub.index));
          auto receipt = api_.submit(api_.ledger_address_for(sub.index), to_bytes(sub.payload),
                                     sub.chaincode);
          r.add("esp", receipt.esp_id)
              .add("esp_attempts", std::to_string(receipt.esp_attempts))
              .add("osp", receipt.osp_id)
              .add("vsp", receipt.vsp_id)
              .add("commits", std::to_string(receipt.commits.size()));
        });
      }
      return;
    }
    if (s.op == "audit") {
      audit(s);
      return;
    }
    attempt(s, [&](Record& r) { step(s, r); });
  }

  template <typename F>
  void attempt(const ScenarioStep& s, F&& body) {
    Record r;
    r.add("line", std::to_string(s.line)).add("op", s.op);
    std::string status = "ok";
    std::string error;
    try {
      body(r);
      if (auto st = r.get("status"); !st.empty()) {
        status = st;
        r.fields.erase(std::remove_if(r.fields.begin(), r.fields.end(),
                                      [](const auto& f) { return f.first == "status"; }),
                       r.fields.end());
      }
    } catch (const ApiError& e) {
      status = std::string(api_error_kind_name(e.kind()));
      error = e.what();
    } catch (const std::invalid_argument& e) {
      status = "usage";
      error = e.what();
    }
    r.add("status", status);
    if (!error.empty()) r.add("error", error);
    last_status_ = status;
    emit(std::move(r));
  }

  void step(const ScenarioStep& s, Record& r) {
    auto& clock = world_.clock();
    if (s.op == "at") {
      clock.set(static_cast<std::int64_t>(number(s, 0, "time")));
      r.add("now", std::to_string(clock.now()));
    } else if (s.op == "advance") {
      clock.advance(static_cast<std::int64_t>(number(s, 0, "time")));
      r.add("now", std::to_string(clock.now()));
    } else if (s.op == "fault") {
      auto f = parse_fault(s, sc_.world.providers);
      for (const auto& id : f.targets) world_.inject(id, f.program);
      std::string mode(harness::mode_name(f.program.mode));
      if (f.program.mode == harness::FaultMode::delayed) mode += ":" + std::to_string(f.program.delay_ms);
      r.add("target", s.args[0]).add("providers", std::to_string(f.targets.size())).add("mode", mode);
      if (f.program.window) {
        r.add("window", std::to_string(f.program.window->first) + "-" +
                            std::to_string(f.program.window->second));
      }
    } else if (s.op == "heal") {
      auto ids = targets(s, s.args[0], sc_.world.providers);
      for (const auto& id : ids) world_.heal(id);
      r.add("target", s.args[0]).add("providers", std::to_string(ids.size()));
    } else if (s.op == "create") {
      r.add("ledger", s.args[0]);
      auto created = api_.create_ledger(static_cast<std::uint32_t>(number(s, 0, "ledger index")));
      r.add("address", created.ledger.ledger_address.to_string())
          .add("gba", created.gba_id)
          .add("storage_ok", storage_summary(created.storage));
    } else if (s.op == "flush" || s.op == "poll") {
      r.add("ledger", s.args[0]);
      auto addr = ledger(s);
      auto events = s.op == "flush" ? api_.flush(addr) : api_.poll(addr);
      r.add("commits", std::to_string(events.size()))
          .add("height", std::to_string(api_.local_ledger(addr).tip_height()))
          .add("pending", std::to_string(api_.pending(addr)));
    } else if (s.op == "retry") {
      r.add("ledger", s.args[0]);
      bool done = api_.retry_held(ledger(s));
      r.add("committed", done ? "yes" : "no");
    } else if (s.op == "read") {
      r.add("ledger", s.args[0]);
      auto addr = ledger(s);
      auto l = api_.read_ledger(addr);
      std::optional<RootRecord> root;
      try {
        root = api_.fetch_root_record();
      } catch (const ApiError&) {
      }
      auto report = validate_ledger(l, ledger_directory(l, root));
      r.add("blocks", std::to_string(l.length())).add("validation", report.summary());
      if (!report.ok()) r.add("status", "invalid");
    }
  }

  // Auditor's view: every storage provider's copy, read directly.
  void audit(const ScenarioStep& s) {
    auto addr = ledger(s);
    bool all_ok = true;
    for (const auto& id : world_.ids(ServiceKind::storage)) {
      Record r;
      r.add("line", std::to_string(s.line)).add("op", "audit").add("ledger", s.args[0]).add("storage", id);
      const auto& backend = world_.storage(id).backend();
      auto l = backend.load(addr);
      if (!l) {
        r.add("status", "missing");
        all_ok = false;
      } else {
        auto report = validate_ledger(*l, ledger_directory(*l, backend.load_root(api_.root_address())));
        r.add("blocks", std::to_string(l->length()))
            .add("fingerprint", sha256(serialize_ledger_file(*l)).hex().substr(0, 16));
        if (report.ok()) {
          r.add("status", "ok");
        } else {
          all_ok = false;
          auto first = *report.first_failure();
          r.add("status", "invalid").add("first_failure", first.location() + " " +
                                                              std::string(condition_code(first.condition)));
        }
      }
      emit(std::move(r));
    }
    last_status_ = all_ok ? "ok" : "invalid";
  }

  const Scenario& sc_;
  const std::function<void(const Record&)>& sink_;
  World world_;
  LedgerApi api_;
  ScenarioOutcome out_;
  std::optional<std::string> last_status_;
};

}  // namespace

ScenarioOutcome run_scenario(const Scenario& scenario,
                             const std::function<void(const Record&)>& sink) {
  Runner runner(scenario, sink);
  return runner.run();
}

}  // namespace pbl::services
