#include "harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace stokit::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || p != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> to_integer(const std::string& s) {
  Int v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || p != end) return std::nullopt;
  return v;
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"experiment", "seed", "n_paths", "dt", "t_final", "scheme", "format", "out", "workers"}},
      {"model", {"name", "params", "x0"}},
      {"domain", {"bounds", "h", "gamma"}},
      {"options", {}},
  };
  return s;
}

struct Entry {
  std::string value;
  int line;
};

class Parser {
 public:
  void error(int line, const std::string& msg) { errors_.push_back("line " + std::to_string(line) + ": " + msg); }
  void error(const std::string& msg) { errors_.push_back(msg); }
  std::vector<std::string>& errors() { return errors_; }

  std::optional<double> number(const Entry& e, const std::string& key) {
    auto v = to_double(e.value);
    if (!v) error(e.line, "malformed number '" + e.value + "' for key '" + key + "'");
    return v;
  }

  std::vector<double> numbers(const Entry& e, const std::string& key) {
    std::vector<double> out;
    if (trim(e.value).empty()) return out;
    for (const auto& item : split(e.value, ',')) {
      auto v = to_double(item);
      if (!v) {
        error(e.line, "malformed number '" + item + "' in key '" + key + "'");
        return {};
      }
      out.push_back(*v);
    }
    return out;
  }

 private:
  std::vector<std::string> errors_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : ValidationError([&] {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        return msg;
      }()),
      errors_(std::move(errors)) {}

std::string to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    case OutputFormat::both: return "both";
  }
  return "csv";
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  if (name == "both") return OutputFormat::both;
  throw ValidationError("unknown format '" + name + "' (expected csv, json or both)");
}

std::string format_number(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

RunConfig parse_config(const std::string& text) {
  Parser P;
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::map<std::string, int> section_line;

  std::istringstream in(text);
  std::string raw, section;
  bool skipping = false;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        P.error(line_no, "malformed section header '" + line + "'");
        skipping = true;
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      skipping = !schema().contains(section);
      if (skipping) {
        P.error(line_no, "unknown section [" + section + "]");
      } else if (section_line.contains(section)) {
        P.error(line_no, "duplicate section [" + section + "] (first on line " +
                             std::to_string(section_line[section]) + ")");
      } else {
        section_line[section] = line_no;
        sections[section];
      }
      continue;
    }
    if (skipping) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      P.error(line_no, "expected 'key = value', got '" + line + "'");
      continue;
    }
    if (section.empty()) {
      P.error(line_no, "key outside of any section");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      P.error(line_no, "empty key");
      continue;
    }
    const auto& allowed = schema().at(section);
    if (section != "options" && !allowed.contains(key)) {
      P.error(line_no, "unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    auto& entries = sections[section];
    if (auto it = entries.find(key); it != entries.end()) {
      P.error(line_no, "duplicate key '" + key + "' in [" + section + "] on lines " +
                           std::to_string(it->second.line) + " and " + std::to_string(line_no));
      continue;
    }
    entries.emplace(key, Entry{value, line_no});
  }

  RunConfig c;
  if (!sections.contains("run")) P.error("missing [run] section");

  if (auto it = sections.find("run"); it != sections.end()) {
    for (const auto& [key, e] : it->second) {
      if (key == "experiment") {
        c.experiment = e.value;
      } else if (key == "seed") {
        auto v = to_integer<std::uint64_t>(e.value);
        if (!v) P.error(e.line, "malformed unsigned 64-bit seed '" + e.value + "'");
        else c.seed = *v;
      } else if (key == "n_paths") {
        auto v = to_integer<std::size_t>(e.value);
        if (!v) P.error(e.line, "malformed integer '" + e.value + "' for key 'n_paths'");
        else c.n_paths = *v;
      } else if (key == "workers") {
        auto v = to_integer<int>(e.value);
        if (!v || *v < 0) P.error(e.line, "workers must be a non-negative integer, got '" + e.value + "'");
        else c.workers = *v;
      } else if (key == "dt") {
        if (auto v = P.number(e, key)) c.dt = *v;
      } else if (key == "t_final") {
        if (auto v = P.number(e, key)) c.t_final = *v;
      } else if (key == "scheme") {
        try {
          c.scheme = parse_scheme(e.value);
        } catch (const Error& ex) {
          P.error(e.line, ex.what());
        }
      } else if (key == "format") {
        try {
          c.format = parse_format(e.value);
        } catch (const Error& ex) {
          P.error(e.line, ex.what());
        }
      } else if (key == "out") {
        if (e.value.empty()) P.error(e.line, "out must not be empty");
        c.out = e.value;
      }
    }
  }

  if (auto it = sections.find("model"); it != sections.end()) {
    ModelBlock m;
    const auto& s = it->second;
    if (auto k = s.find("name"); k != s.end() && !k->second.value.empty()) m.name = k->second.value;
    else P.error(section_line["model"], "[model] needs key 'name'");
    if (auto k = s.find("params"); k != s.end() && !k->second.value.empty()) {
      for (const auto& item : split(k->second.value, ',')) {
        const auto colon = item.find(':');
        const std::string name = colon == std::string::npos ? item : trim(item.substr(0, colon));
        const auto v = colon == std::string::npos ? std::nullopt : to_double(trim(item.substr(colon + 1)));
        if (name.empty() || !v) {
          P.error(k->second.line, "malformed parameter '" + item + "' (expected name:value)");
        } else if (m.params.contains(name)) {
          P.error(k->second.line, "parameter '" + name + "' given twice");
        } else {
          m.params[name] = *v;
        }
      }
    }
    if (auto k = s.find("x0"); k != s.end()) m.x0 = P.numbers(k->second, "x0");
    c.model = m;
  }

  if (auto it = sections.find("domain"); it != sections.end()) {
    DomainBlock d;
    const auto& s = it->second;
    const int line = section_line["domain"];
    if (auto k = s.find("bounds"); k != s.end()) {
      d.bounds = P.numbers(k->second, "bounds");
      if (d.bounds.size() != 2 && d.bounds.size() != 4)
        P.error(k->second.line, "bounds needs 2 (interval) or 4 (rectangle) numbers");
    } else {
      P.error(line, "[domain] needs key 'bounds'");
    }
    if (auto k = s.find("h"); k != s.end()) {
      d.h = P.numbers(k->second, "h");
      if (d.h.empty() || d.h.size() > 2) P.error(k->second.line, "h needs 1 or 2 numbers");
    } else {
      P.error(line, "[domain] needs key 'h'");
    }
    if (auto k = s.find("gamma"); k != s.end() && !k->second.value.empty()) {
      for (const auto& item : split(k->second.value, ',')) {
        try {
          d.gamma.push_back(parse_face(item));
        } catch (const Error& ex) {
          P.error(k->second.line, ex.what());
        }
      }
    }
    c.domain = d;
  }

  if (auto it = sections.find("options"); it != sections.end())
    for (const auto& [key, e] : it->second) c.options[key] = e.value;

  for (const auto& problem : run_problems(c)) P.error(problem);
  if (!P.errors().empty()) {
    // Keep line order; the section scan above visits keys alphabetically.
    auto& errs = P.errors();
    std::stable_sort(errs.begin(), errs.end(), [](const std::string& a, const std::string& b) {
      auto line_of = [](const std::string& s) {
        if (s.rfind("line ", 0) != 0) return 1 << 30;
        return std::atoi(s.c_str() + 5);
      };
      return line_of(a) < line_of(b);
    });
    throw ConfigError(errs);
  }
  return c;
}

std::vector<std::string> run_problems(const RunConfig& c) {
  std::vector<std::string> out;
  if (c.n_paths == 0) out.emplace_back("n_paths must be positive");
  const bool dt_ok = c.dt > 0.0 && std::isfinite(c.dt), tf_ok = c.t_final > 0.0 && std::isfinite(c.t_final);
  if (!dt_ok) out.emplace_back("dt must be positive");
  if (!tf_ok) out.emplace_back("t_final must be positive");
  if (dt_ok && tf_ok && c.dt > c.t_final) out.emplace_back("dt must not exceed t_final");
  if (c.workers < 0) out.emplace_back("workers must be non-negative");
  if (c.out.empty()) out.emplace_back("out must not be empty");
  return out;
}

void validate_run(const RunConfig& c) {
  const auto problems = run_problems(c);
  if (problems.empty()) return;
  std::string msg = problems.front();
  for (std::size_t i = 1; i < problems.size(); ++i) msg += "; " + problems[i];
  throw ValidationError(msg);
}

std::string serialize(const RunConfig& c, SerializeMode mode) {
  std::ostringstream o;
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
    return s;
  };
  o << "[run]\n";
  if (!c.experiment.empty()) o << "experiment = " << c.experiment << "\n";
  if (c.seed) o << "seed = " << *c.seed << "\n";
  o << "n_paths = " << c.n_paths << "\n";
  o << "dt = " << format_number(c.dt) << "\n";
  o << "t_final = " << format_number(c.t_final) << "\n";
  o << "scheme = " << to_string(c.scheme) << "\n";
  if (mode == SerializeMode::full) {
    o << "format = " << to_string(c.format) << "\n";
    o << "out = " << c.out << "\n";
    o << "workers = " << c.workers << "\n";
  }
  if (c.model) {
    o << "\n[model]\nname = " << c.model->name << "\n";
    if (!c.model->params.empty()) {
      o << "params = ";
      bool first = true;
      for (const auto& [k, v] : c.model->params) {
        o << (first ? "" : ", ") << k << ":" << format_number(v);
        first = false;
      }
      o << "\n";
    }
    if (!c.model->x0.empty()) o << "x0 = " << list(c.model->x0) << "\n";
  }
  if (c.domain) {
    o << "\n[domain]\nbounds = " << list(c.domain->bounds) << "\nh = " << list(c.domain->h) << "\n";
    if (!c.domain->gamma.empty()) {
      o << "gamma = ";
      for (std::size_t i = 0; i < c.domain->gamma.size(); ++i) o << (i ? ", " : "") << to_string(c.domain->gamma[i]);
      o << "\n";
    }
  }
  if (!c.options.empty()) {
    o << "\n[options]\n";
    for (const auto& [k, v] : c.options) o << k << " = " << v << "\n";
  }
  return o.str();
}

}  // namespace stokit::harness
