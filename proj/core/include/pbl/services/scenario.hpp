#pragma once

// Line-oriented scenario scripts: a header describing the simulated
// deployment followed by a workload with fault injections. Grammar is in
// docs/scenario.md.

#include <filesystem>

#include "pbl/services/matrix.hpp"

namespace pbl::services {

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ScenarioStep {
  std::size_t line = 0;
  std::string op;
  std::vector<std::string> args;
};

struct Scenario {
  WorldConfig world;
  std::uint64_t phrase_seed = 1;
  std::vector<ScenarioStep> steps;

  static Scenario parse(std::string_view text);
  static Scenario load(const std::filesystem::path& path);
};

/// One output line: ordered key=value fields.
struct Record {
  std::vector<std::pair<std::string, std::string>> fields;

  Record& add(std::string key, std::string value);
  std::string get(std::string_view key) const;
  /// `k=v k=v ...`; values containing spaces are double-quoted.
  std::string kv() const;
};

struct ScenarioOutcome {
  std::vector<Record> records;
  std::size_t expectations = 0;
  std::size_t expectation_failures = 0;
  std::vector<MatrixReport> matrices;

  bool ok() const;
};

/// `sink` sees each record as it is produced.
ScenarioOutcome run_scenario(const Scenario& scenario,
                             const std::function<void(const Record&)>& sink = {});

/// `count`, `interval` (ms) or `size` (bytes); throws std::invalid_argument.
CuttingCondition parse_cutting_condition(std::string_view kind, std::uint64_t threshold);

/// Table rows (one per kind and healthy count) plus a summary row.
std::vector<Record> matrix_records(const MatrixReport& report);

}  // namespace pbl::services
