#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stokit/errors.hpp"
#include "stokit/exit_problems.hpp"
#include "stokit/integrators.hpp"
#include "stokit/sde_model.hpp"

namespace stokit::harness {

enum class OutputFormat { csv, json, both };

std::string to_string(OutputFormat format);
OutputFormat parse_format(const std::string& name);

struct ModelBlock {
  std::string name;
  Params params;
  std::vector<double> x0;  // empty: experiment default
  bool operator==(const ModelBlock&) const = default;
};

struct DomainBlock {
  std::vector<double> bounds;  // lo, hi or x_lo, x_hi, y_lo, y_hi
  std::vector<double> h;       // one spacing, or one per axis
  std::vector<Face> gamma;
  bool operator==(const DomainBlock&) const = default;
};

struct RunConfig {
  std::string experiment;  // may come from the command line instead
  std::optional<std::uint64_t> seed;
  std::size_t n_paths = 1000;
  double dt = 1e-3;
  double t_final = 1.0;
  Scheme scheme = Scheme::euler_maruyama;
  OutputFormat format = OutputFormat::csv;
  std::string out = "stokit_out";
  int workers = 0;  // 0: one per hardware thread
  std::optional<ModelBlock> model;
  std::optional<DomainBlock> domain;
  std::map<std::string, std::string> options;  // experiment-specific, checked at dispatch
  bool operator==(const RunConfig&) const = default;
};

// Every problem found while parsing, in line order.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

// Sectioned "key = value" text with [run], [model], [domain] and [options].
// '#' and ';' start comment lines.
RunConfig parse_config(const std::string& text);

// full: everything parse_config reads back to an equal RunConfig.
// artifact: omits out, format and workers, which must not change the bytes
// of an artifact.
enum class SerializeMode { full, artifact };
std::string serialize(const RunConfig& config, SerializeMode mode = SerializeMode::full);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

// Range checks shared by the config file and command-line overrides.
std::vector<std::string> run_problems(const RunConfig& config);
// ValidationError listing every problem.
void validate_run(const RunConfig& config);

}  // namespace stokit::harness
