#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "harness/config.hpp"

namespace stokit::harness {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct ExperimentResult {
  std::vector<Table> tables;
  nlohmann::ordered_json summary;
};

// Experiment options merged over their defaults; unknown keys are rejected
// when the set is built.
class Options {
 public:
  Options(const std::map<std::string, std::string>& defaults, const std::map<std::string, std::string>& given,
          const std::string& experiment);

  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// What an experiment sees: the config with every default filled in, the
// resolved master seed and the worker count.
struct RunContext {
  RunConfig config;
  std::uint64_t seed = 42;
  int workers = 1;
};

struct Experiment {
  std::string name;
  std::string summary;
  std::map<std::string, std::string> option_defaults;
  std::function<ExperimentResult(const RunContext&, const Options&)> run;
};

// Sorted by name.
const std::vector<Experiment>& experiments();
std::vector<std::string> experiment_names();
// Registered name with the smallest edit distance.
std::string nearest_experiment(const std::string& name);
// LookupError naming the nearest registered experiment.
const Experiment& find_experiment(const std::string& name);

struct Manifest {
  std::string experiment;
  std::string directory;
  std::vector<std::string> files;  // relative to directory
  nlohmann::ordered_json params;
  std::uint64_t seed = 0;
  int workers = 1;
  double wall_time_s = 0.0;
};

// Runs the experiment named in the config and writes its artifacts plus
// manifest.json into config.out. Artifacts carry the resolved config and
// seed but neither the worker count nor timings, so reruns are
// byte-identical.
Manifest run_experiment(const RunConfig& config, std::uint64_t seed, int workers);

// Resolved config rendered for artifacts (seed filled in, `out`, `format`
// and `workers` left out).
std::string artifact_config(const RunConfig& config, std::uint64_t seed);

}  // namespace stokit::harness
