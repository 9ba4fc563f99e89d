#include "harness/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "harness/config.hpp"
#include "harness/experiments.hpp"
#include "stokit/parallel.hpp"

namespace stokit::harness {

namespace {

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const BlowUpError*>(&e)) return "blow_up";
  if (dynamic_cast<const SolverError*>(&e)) return "solver";
  if (dynamic_cast<const CensoringError*>(&e)) return "censoring";
  if (dynamic_cast<const CapabilityError*>(&e)) return "capability";
  if (dynamic_cast<const RangeError*>(&e)) return "range";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  return "runtime";
}

std::optional<std::uint64_t> parse_seed(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::optional<std::string>& env_seed) {
  CLI::App app{"Stochastic dynamics experiments with reproducible CSV/JSON artifacts.", "stokit"};
  app.allow_extras();
  app.require_subcommand(0, 1);

  std::string config_path, out_dir, format;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double dt = 0.0, t_final = 0.0;
  int workers = 0;
  auto* o_config = app.add_option("--config", config_path, "Config file ([run], [model], [domain], [options])");
  auto* o_seed = app.add_option("--seed", seed, "Master seed (overrides STOKIT_SEED and the config)");
  auto* o_paths = app.add_option("--paths", paths, "Number of Monte Carlo paths");
  auto* o_dt = app.add_option("--dt", dt, "Time step");
  auto* o_tf = app.add_option("--t-final", t_final, "Final time");
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_format = app.add_option("--format", format, "Artifact format")->check(CLI::IsMember({"csv", "json", "both"}));
  auto* o_workers = app.add_option("--workers", workers, "Worker threads (default: hardware threads)")
                        ->check(CLI::PositiveNumber);

  std::vector<CLI::App*> subs;
  for (const auto& e : experiments()) subs.push_back(app.add_subcommand(e.name, e.summary)->fallthrough());
  auto* list = app.add_subcommand("list", "Print the registered experiments")->fallthrough();

  std::vector<std::string> argv_store{"stokit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  if (const auto extra = app.remaining(); !extra.empty()) {
    if (!extra.front().empty() && extra.front()[0] != '-') {
      err << "error: unknown experiment '" << extra.front() << "'; did you mean '"
          << nearest_experiment(extra.front()) << "'?\n"
          << "run 'stokit list' for the registered experiments\n";
    } else {
      err << "error: unrecognized argument '" << extra.front() << "'\n" << app.help();
    }
    return 2;
  }

  if (list->parsed()) {
    for (const auto& name : experiment_names()) out << name << "\n";
    return 0;
  }

  try {
    RunConfig config;
    if (o_config->count()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) {
        err << "error: cannot read config file '" << config_path << "'\n";
        return 2;
      }
      std::ostringstream text;
      text << in.rdbuf();
      config = parse_config(text.str());
    }
    for (auto* s : subs)
      if (s->parsed()) config.experiment = s->get_name();
    if (config.experiment.empty()) {
      err << "error: no experiment given\n" << app.help();
      return 2;
    }

    if (o_paths->count()) config.n_paths = paths;
    if (o_dt->count()) config.dt = dt;
    if (o_tf->count()) config.t_final = t_final;
    if (o_out->count()) config.out = out_dir;
    if (o_format->count()) config.format = parse_format(format);

    std::uint64_t resolved_seed = 42;
    if (o_seed->count()) {
      resolved_seed = seed;
    } else if (env_seed) {
      const auto v = parse_seed(*env_seed);
      if (!v) {
        err << "error: STOKIT_SEED must be an unsigned 64-bit integer, got '" << *env_seed << "'\n";
        return 2;
      }
      resolved_seed = *v;
    } else if (config.seed) {
      resolved_seed = *config.seed;
    }
    const int resolved_workers = o_workers->count() ? workers : config.workers > 0 ? config.workers : default_workers();

    validate_run(config);
    const Manifest m = run_experiment(config, resolved_seed, resolved_workers);
    out << m.experiment << ": wrote " << m.files.size() << " artifact" << (m.files.size() == 1 ? "" : "s") << " to "
        << m.directory << " (seed " << m.seed << ", " << m.wall_time_s << " s)\n";
    for (const auto& f : m.files) out << "  " << f << "\n";
    out << "  manifest.json\n";
    return 0;
  } catch (const ConfigError& e) {
    for (const auto& line : e.errors()) err << "config error: " << line << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const LookupError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace stokit::harness
