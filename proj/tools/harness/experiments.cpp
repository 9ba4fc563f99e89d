#include "harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stokit/calculus.hpp"
#include "stokit/closed_form.hpp"
#include "stokit/manifolds.hpp"
#include "stokit/moments.hpp"
#include "stokit/random.hpp"
#include "stokit/random_dynamics.hpp"

namespace stokit::harness {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- options

Options::Options(const std::map<std::string, std::string>& defaults, const std::map<std::string, std::string>& given,
                 const std::string& experiment)
    : values_(defaults) {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : given) {
    if (!defaults.contains(k)) unknown.push_back(k);
    else values_[k] = v;
  }
  if (!unknown.empty()) {
    std::string msg = "unknown option";
    msg += unknown.size() > 1 ? "s" : "";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", '" : " '") + unknown[i] + "'";
    msg += " for experiment '" + experiment + "' (allowed:";
    for (const auto& [k, v] : defaults) msg += " " + k;
    if (defaults.empty()) msg += " none";
    throw ValidationError(msg + ")");
  }
}

const std::string& Options::text(const std::string& key) const { return values_.at(key); }

double Options::number(const std::string& key) const {
  const auto& s = text(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v))
    throw ValidationError("option '" + key + "': malformed number '" + s + "'");
  return v;
}

long Options::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v)) throw ValidationError("option '" + key + "' must be an integer");
  return static_cast<long>(v);
}

bool Options::flag(const std::string& key) const {
  const auto& s = text(key);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ValidationError("option '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<std::string> Options::list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(text(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

namespace {

// ---------------------------------------------------------------- helpers

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

EnsembleConfig ensemble_config(const RunContext& ctx) {
  EnsembleConfig e;
  e.n_paths = ctx.config.n_paths;
  e.T = ctx.config.t_final;
  e.dt = ctx.config.dt;
  e.master_seed = ctx.seed;
  e.workers = ctx.workers;
  return e;
}

McConfig mc_config(const RunContext& ctx) {
  return McConfig{ctx.config.n_paths, ctx.config.dt, ctx.seed, ctx.workers};
}

// Fills the catalog defaults into the model block, so artifacts show every
// parameter, and sets x0 to `fallback` when none is given.
void resolve_model(RunConfig& c, const std::string& default_name, const Params& default_params = {},
                   const std::function<std::vector<double>(int n)>& fallback = {}) {
  if (!c.model) c.model = ModelBlock{default_name, default_params, {}};
  const auto& catalog = builtin_models();
  const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const auto& e) { return e.name == c.model->name; });
  if (it == catalog.end()) make_builtin(c.model->name);  // throws LookupError with the catalog
  Params merged = it->defaults;
  for (const auto& [k, v] : c.model->params) merged[k] = v;
  const SdeModel model = make_builtin(c.model->name, c.model->params);
  c.model->params = merged;
  if (c.model->x0.empty()) c.model->x0 = fallback ? fallback(model.n()) : std::vector<double>(model.n(), 1.0);
  if (static_cast<int>(c.model->x0.size()) != model.n())
    throw ValidationError("x0 has " + std::to_string(c.model->x0.size()) + " components, model '" + c.model->name +
                          "' has dimension " + std::to_string(model.n()));
}

SdeModel build_model(const RunConfig& c) { return make_builtin(c.model->name, c.model->params); }

Domain build_domain(const DomainBlock& d) {
  if (d.bounds.size() == 2) {
    if (d.h.size() != 1) throw ValidationError("an interval domain takes a single h");
    return Domain::interval(d.bounds[0], d.bounds[1], d.h[0], d.gamma);
  }
  const double hx = d.h[0], hy = d.h.size() > 1 ? d.h[1] : d.h[0];
  return Domain::rectangle({d.bounds[0], d.bounds[2]}, {d.bounds[1], d.bounds[3]}, {hx, hy}, d.gamma);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

double log_slope(const std::vector<double>& dts, const std::vector<double>& values) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < dts.size(); ++i)
    if (values[i] > 0.0) {
      x.push_back(std::log(dts[i]));
      y.push_back(std::log(values[i]));
    }
  return x.size() >= 2 ? fit_slope(x, y) : std::nan("");
}

// ---------------------------------------------------------------- simulate

ExperimentResult run_simulate(const RunContext& ctx, const Options&) {
  const SdeModel model = build_model(ctx.config);
  const auto ens = run_ensemble(model, to_vector(ctx.config.model->x0), ctx.config.scheme, ensemble_config(ctx));
  Table t{"moments", {"t"}, {}};
  for (int i = 0; i < model.n(); ++i) t.columns.push_back("mean_x" + std::to_string(i + 1));
  for (int i = 0; i < model.n(); ++i) t.columns.push_back("var_x" + std::to_string(i + 1));
  t.columns.insert(t.columns.end(), {"energy", "energy_se"});
  const auto& energy = ens.channel("energy");
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    std::vector<Cell> row{ens.times[k]};
    for (int i = 0; i < model.n(); ++i) row.emplace_back(ens.mean_state(i, static_cast<Eigen::Index>(k)));
    for (int i = 0; i < model.n(); ++i) row.emplace_back(ens.var_state(i, static_cast<Eigen::Index>(k)));
    row.emplace_back(energy.mean[k]);
    row.emplace_back(energy.se[k]);
    t.rows.push_back(std::move(row));
  }
  json s;
  s["n_used"] = ens.n_used;
  s["blowups"] = ens.blowups;
  s["terminal_mean"] = to_std(ens.mean_state.col(ens.mean_state.cols() - 1));
  s["terminal_var"] = to_std(ens.var_state.col(ens.var_state.cols() - 1));
  return {{t}, s};
}

// ---------------------------------------------------------------- order

ExperimentResult run_order(const RunContext& ctx, const Options& opt) {
  const auto& m = *ctx.config.model;
  ClosedFormProblem problem = [&] {
    if (m.name == "population") return gbm_problem(m.params.at("r"), m.params.at("alpha"), m.x0[0]);
    if (m.name == "langevin") return ou_problem(m.params.at("b"), m.params.at("a"), m.x0[0]);
    throw ValidationError("order needs a model with a closed-form solution: population or langevin, got '" +
                          m.name + "'");
  }();
  const long levels = opt.integer("levels");
  if (levels < 2 || levels > 20) throw ValidationError("option 'levels' must be in [2, 20]");
  std::vector<double> dts;
  for (long k = 0; k < levels; ++k) dts.push_back(ctx.config.dt / std::pow(2.0, static_cast<double>(k)));

  Table t{"errors", {"scheme", "dt", "rms_error"}, {}};
  json slopes = json::object();
  for (const auto& name : opt.list("schemes")) {
    const Scheme scheme = parse_scheme(name);
    const auto study = strong_order_estimate(problem, scheme, dts, ctx.config.n_paths, ctx.config.t_final, ctx.seed,
                                             ctx.workers);
    for (std::size_t i = 0; i < study.dts.size(); ++i) t.rows.push_back({to_string(scheme), study.dts[i], study.rms_error[i]});
    slopes[to_string(scheme)] = study.slope;
  }
  return {{t}, json{{"problem", m.name}, {"slopes", slopes}}};
}

// ---------------------------------------------------------------- calculus

IntegrandSampler integrand(const std::string& name) {
  if (name == "1") return integrands::constant(1.0);
  if (name == "t") return integrands::time();
  if (name == "W") return integrands::brownian();
  throw ValidationError("unknown integrand '" + name + "' (expected 1, t or W)");
}

ExperimentResult run_calculus(const RunContext& ctx, const Options& opt) {
  const McConfig mc = mc_config(ctx);
  const double T = ctx.config.t_final;
  const auto names = opt.list("integrands");
  if (names.empty()) throw ValidationError("option 'integrands' is empty");
  Table checks{"checks", {"check", "integrand", "lhs", "rhs", "se", "pass"}, {}};
  auto add = [&](const IdentityReport& r, const std::string& label) {
    checks.rows.push_back({r.check, label, r.lhs, r.rhs, r.se, std::int64_t{r.pass}});
  };
  bool all_pass = true;
  // E[int_0^a f dW int_0^b g dW] = E int_0^min(a,b) f g dt with a at the grid node nearest T/2.
  const double half = std::max(1.0, std::round(T / (2.0 * ctx.config.dt))) * ctx.config.dt;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto f = integrand(names[i]);
    const auto iso = isometry_check(f, T, mc);
    add(iso, names[i]);
    for (std::size_t j = i; j < names.size(); ++j) {
      const auto gen = generalized_isometry_check(f, integrand(names[j]), half, T, mc);
      add(gen, names[i] + "*" + names[j]);
      all_pass = all_pass && gen.pass;
    }
    const auto doob = doob_bound_check(f, opt.number("lambda"), 0.0, T, mc);
    const auto sup = second_moment_sup_check(f, 0.0, T, mc);
    add(doob, names[i]);
    add(sup, names[i]);
    all_pass = all_pass && iso.pass && doob.pass && sup.pass;
  }

  // Stratonovich minus Ito for int W dW on nested grids of one path set.
  const long levels = opt.integer("gap_levels");
  if (levels < 2 || levels > 12) throw ValidationError("option 'gap_levels' must be in [2, 12]");
  std::vector<double> dts, sq(static_cast<std::size_t>(levels), 0.0);
  for (long k = levels - 1; k >= 0; --k) dts.push_back(ctx.config.dt * std::pow(2.0, static_cast<double>(k)));
  const auto w = integrands::brownian();
  for (std::size_t i = 0; i < ctx.config.n_paths; ++i) {
    const auto fine = sample_path(derive_seed(ctx.seed, i), 1, 0.0, T, ctx.config.dt);
    for (long k = 0; k < levels; ++k) {
      const auto p = fine.coarsen(1 << (levels - 1 - k));
      const double t_end = p.t_max();
      const double gap = stratonovich_integral(w(p), p, 0.0, t_end) - ito_integral(w(p), p, 0.0, t_end);
      sq[static_cast<std::size_t>(k)] += (gap - t_end / 2.0) * (gap - t_end / 2.0);
    }
  }
  Table gap{"strat_ito_gap", {"dt", "rms_gap_error"}, {}};
  std::vector<double> rms;
  for (long k = 0; k < levels; ++k) {
    rms.push_back(std::sqrt(sq[static_cast<std::size_t>(k)] / static_cast<double>(ctx.config.n_paths)));
    gap.rows.push_back({dts[static_cast<std::size_t>(k)], rms.back()});
  }
  return {{checks, gap}, json{{"all_checks_pass", all_pass}, {"gap_rate", log_slope(dts, rms)}}};
}

// ---------------------------------------------------------------- moments

LorenzParams lorenz_params(const RunConfig& c) {
  if (c.model->name != "lorenz") throw ValidationError("Lorenz bound checks need model 'lorenz'");
  const auto& p = c.model->params;
  return LorenzParams{p.at("r"), p.at("s"), p.at("b"), p.at("eps")};
}

ExperimentResult run_moments(const RunContext& ctx, const Options& opt) {
  const std::string check = opt.text("check");
  const Vector x0 = to_vector(ctx.config.model->x0);
  const auto cfg = ensemble_config(ctx);

  if (check == "energy" || check == "error_growth") {
    const SdeModel model = build_model(ctx.config);
    Table t{"series", {"t", check == "energy" ? "energy" : "half_mse", check == "energy" ? "energy_se" : "half_mse_se",
                       "drift_term", "noise_term", "residual", "residual_se"}, {}};
    auto fill = [&](const std::vector<double>& times, const ChannelStats& q, const ChannelStats& drift,
                    const ChannelStats& noise, const ChannelStats& res) {
      for (std::size_t k = 0; k < times.size(); ++k)
        t.rows.push_back({times[k], q.mean[k], q.se[k], drift.mean[k], noise.mean[k], res.mean[k], res.se[k]});
      return fraction_within(res);
    };
    double frac = 0.0;
    std::string reference;
    if (check == "energy") {
      const auto s = energy_balance_residual(model, run_ensemble(model, x0, ctx.config.scheme, cfg));
      frac = fill(s.times, s.energy, s.drift_term, s.noise_term, s.residual);
    } else {
      const auto s = error_growth_series(model, x0, x0, ctx.config.scheme, cfg);
      frac = fill(s.times, s.half_mse, s.drift_term, s.noise_term, s.residual);
      reference = s.reference_label;
    }
    json s{{"check", check}, {"fraction_within_3se", frac}, {"pass", frac >= 0.95}};
    if (!reference.empty()) s["reference"] = reference;
    return {{t}, s};
  }
  if (check == "lorenz_energy" || check == "lorenz_error") {
    const auto p = lorenz_params(ctx.config);
    BoundReport rep;
    if (check == "lorenz_energy") {
      rep = lorenz_energy_bound_check(p, x0, cfg);
    } else {
      const std::string form = opt.text("form");
      if (form != "as_stated" && form != "with_noise_source")
        throw ValidationError("option 'form' must be as_stated or with_noise_source");
      rep = lorenz_error_bound_check(p, x0, cfg,
                                     form == "as_stated" ? ErrorBoundForm::as_stated : ErrorBoundForm::with_noise_source);
    }
    Table t{"bound", {"t", "gap", "gap_se", "violates"}, {}};
    std::vector<bool> bad(rep.times.size(), false);
    for (std::size_t i = 0; i < rep.times.size(); ++i) bad[i] = rep.gap[i] > kPassSigmas * rep.se[i];
    for (std::size_t i = 0; i < rep.times.size(); ++i)
      t.rows.push_back({rep.times[i], rep.gap[i], rep.se[i], std::int64_t{bad[i]}});
    return {{t},
            json{{"check", rep.check}, {"coefficient", rep.coefficient}, {"violations", rep.violations},
                 {"nodes", rep.nodes}, {"pass", rep.pass()}}};
  }
  throw ValidationError("option 'check' must be energy, error_growth, lorenz_energy or lorenz_error");
}

void resolve_moments(RunConfig& c, const Options& opt) {
  const std::string check = opt.text("check");
  const bool lorenz = check == "lorenz_energy" || check == "lorenz_error";
  resolve_model(c, lorenz ? "lorenz" : "langevin");
}

// ---------------------------------------------------------------- exit

void resolve_exit(RunConfig& c, const Options&) {
  if (!c.domain) c.domain = DomainBlock{{0.0, 1.0}, {0.005}, {Face::right}};
  const Domain d = build_domain(*c.domain);
  auto center = [&](int) {
    std::vector<double> x;
    for (int a = 0; a < d.dim(); ++a) x.push_back(0.5 * (d.lo(a) + d.hi(a)));
    return x;
  };
  resolve_model(c, "brownian", {{"n", static_cast<double>(d.dim())}}, center);
}

ExperimentResult run_exit(const RunContext& ctx, const Options& opt) {
  const SdeModel model = build_model(ctx.config);
  const Domain domain = build_domain(*ctx.config.domain);
  const std::string st = opt.text("stencil");
  if (st != "automatic" && st != "upwind") throw ValidationError("option 'stencil' must be automatic or upwind");
  const DriftStencil stencil = st == "upwind" ? DriftStencil::upwind : DriftStencil::automatic;
  const auto p = escape_probability(model, domain, stencil);
  const auto u = mean_residence_time(model, domain, stencil);

  Table field{"field", domain.dim() == 1 ? std::vector<std::string>{"x", "p", "u"}
                                         : std::vector<std::string>{"x", "y", "p", "u"}, {}};
  for (std::size_t n = 0; n < domain.nodes(); ++n) {
    const Vector x = domain.point(n);
    std::vector<Cell> row;
    for (int a = 0; a < domain.dim(); ++a) row.emplace_back(x[a]);
    row.emplace_back(p.values[n]);
    row.emplace_back(u.values[n]);
    field.rows.push_back(std::move(row));
  }
  json s;
  s["average_escape_probability"] = average_escape_probability(p);
  s["upwinded_rows"] = assemble_generator(model, domain, stencil).upwinded_rows;
  double pmin = 1.0, pmax = 0.0;
  for (double v : p.values) pmin = std::min(pmin, v), pmax = std::max(pmax, v);
  s["p_min"] = pmin;
  s["p_max"] = pmax;

  if (opt.flag("mc")) {
    const Vector x0 = to_vector(ctx.config.model->x0);
    ExitOptions eo;
    eo.bridge_correction = opt.flag("bridge");
    eo.t_max = opt.number("t_max");
    eo.workers = ctx.workers;
    const double dt = ctx.config.dt;
    const auto mc = mc_exit(model, x0, domain, ctx.config.n_paths, dt, ctx.seed, eo);
    const double fd_p = p.interpolate(x0), fd_u = u.interpolate(x0);
    const double bias_p = eo.bridge_correction ? 0.0 : exit_bias_allowance(model, p, dt);
    const double bias_u = eo.bridge_correction ? 0.0 : exit_bias_allowance(model, u, dt);
    s["mc"] = json{{"x0", ctx.config.model->x0},
                   {"n_paths", mc.n_paths},
                   {"censored", mc.censored},
                   {"gamma_probability", mc.gamma_probability},
                   {"gamma_probability_se", mc.gamma_probability_se},
                   {"fd_gamma_probability", fd_p},
                   {"gamma_bias_allowance", bias_p},
                   {"gamma_agrees", std::abs(mc.gamma_probability - fd_p) <= 3.0 * mc.gamma_probability_se + bias_p},
                   {"mean_exit_time", mc.mean_exit_time},
                   {"mean_exit_time_se", mc.mean_exit_time_se},
                   {"fd_mean_exit_time", fd_u},
                   {"exit_time_bias_allowance", bias_u},
                   {"exit_time_agrees", std::abs(mc.mean_exit_time - fd_u) <= 3.0 * mc.mean_exit_time_se + bias_u}};
    const auto w = predictability_window(model, x0, domain, opt.number("q"), ctx.config.n_paths, dt, ctx.seed, eo,
                                         static_cast<std::size_t>(opt.integer("bootstrap")));
    s["predictability_window"] = json{{"q", w.q}, {"estimate", w.estimate}, {"ci_low", w.ci_low},
                                      {"ci_high", w.ci_high}, {"censored", w.censored}};
  }
  return {{field}, s};
}

// ---------------------------------------------------------------- manifold

ExperimentResult run_manifold(const RunContext& ctx, const Options& opt) {
  const SdeModel model = build_model(ctx.config);
  if (model.n() != 2) throw ValidationError("manifold needs a planar model");
  const double radius = opt.number("radius");
  if (!(radius > 0.0)) throw ValidationError("option 'radius' must be positive");
  const std::string which = opt.text("manifold");
  if (which != "circle" && which != "ellipse") throw ValidationError("option 'manifold' must be circle or ellipse");
  const bool circle = which == "circle";
  const ManifoldSpec spec = circle ? circle_spec(radius) : ellipse_spec(radius * radius);
  auto on_manifold = [&](double th) {
    Vector x(2);
    x << radius * std::cos(th), (circle ? radius : radius / std::sqrt(2.0)) * std::sin(th);
    return x;
  };

  const long points = opt.integer("points");
  if (points < 1) throw ValidationError("option 'points' must be positive");
  Table res{"residuals", {"theta", "x", "y", "r_mu"}, {}};
  for (int j = 0; j < model.m(); ++j) res.columns.push_back("r_sigma_" + std::to_string(j + 1));
  double worst = 0.0;
  for (long k = 0; k < points; ++k) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(points);
    const Vector x = on_manifold(th);
    const auto r = tangency_residual(model, spec, x);
    std::vector<Cell> row{th, x[0], x[1], r.r_mu};
    worst = std::max(worst, std::abs(r.r_mu));
    for (int j = 0; j < model.m(); ++j) {
      row.emplace_back(r.r_sigma[j]);
      worst = std::max(worst, std::abs(r.r_sigma[j]));
    }
    res.rows.push_back(std::move(row));
  }
  json s;
  s["manifold"] = spec.label;
  s["max_abs_residual"] = worst;
  s["tolerance"] = tangency_tolerance(model);
  s["tangent"] = worst <= tangency_tolerance(model);

  std::vector<Table> tables{res};
  if (circle && model.m() == 1) {
    // Invariant graphs solve <sigma, grad u> = 0; seed them on the positive
    // x axis with the signed distance u = s - radius.
    CharacteristicField f;
    f.n = 2;
    f.a = [&model](const Vector& x) -> Vector { return model.diffusion(0.0, x).col(0); };
    f.c = [](const Vector&, double) { return 0.0; };
    f.gamma0 = [radius](const Vector& sv) {
      Vector x(2);
      x << sv[0], 0.0;
      return std::make_pair(x, sv[0] - radius);
    };
    const long curves = opt.integer("curves");
    if (curves < 2) throw ValidationError("option 'curves' must be at least 2");
    std::vector<Vector> grid;
    for (long i = 0; i < curves; ++i)
      grid.push_back(Vector::Constant(1, radius * (0.55 + 0.9 * static_cast<double>(i) / static_cast<double>(curves - 1))));
    const auto nc = noncharacteristic_check(f, grid);
    const auto zs = extract_zero_set(characteristics_solve(f, grid, {0.0, 2.0 * std::numbers::pi}, opt.number("char_dt")));
    Table zt{"zero_set", {"x", "y", "g"}, {}};
    double gmax = 0.0;
    for (const auto& x : zs.points) {
      const double g = spec.G(x);
      gmax = std::max(gmax, std::abs(g));
      zt.rows.push_back({x[0], x[1], g});
    }
    s["noncharacteristic"] = nc.pass;
    s["zero_set_points"] = zs.points.size();
    s["zero_set_max_abs_g"] = gmax;
    if (!zs.notice.empty()) s["zero_set_notice"] = zs.notice;
    tables.push_back(std::move(zt));
  }

  const auto inv = manifold_invariance_mc(model, spec, on_manifold(0.0), ctx.config.n_paths, ctx.config.dt,
                                          ctx.config.t_final, ctx.seed, static_cast<int>(opt.integer("halvings")),
                                          parse_scheme(opt.text("scheme")), ctx.workers);
  Table it{"invariance", {"dt", "median_max_abs_g", "mean_max_abs_g", "median_terminal_abs_g"}, {}};
  for (const auto& l : inv.levels) it.rows.push_back({l.dt, l.median_max_abs_g, l.mean_max_abs_g, l.median_terminal_abs_g});
  s["halving_factors"] = inv.halving_factors;
  tables.push_back(std::move(it));
  return {tables, s};
}

void resolve_manifold(RunConfig& c, const Options& opt) {
  const double r = opt.number("radius");
  resolve_model(c, "circle_manifold", {}, [r](int n) {
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    x[0] = r;
    return x;
  });
}

// ---------------------------------------------------------------- rds

ConvolutionRule parse_rule(const std::string& s) {
  if (s == "ito_left_point") return ConvolutionRule::ito_left_point;
  if (s == "pathwise_left_point") return ConvolutionRule::pathwise_left_point;
  if (s == "pathwise_trapezoid") return ConvolutionRule::pathwise_trapezoid;
  throw ValidationError("unknown convolution rule '" + s + "'");
}

ExperimentResult run_rds(const RunContext& ctx, const Options& opt) {
  const double a = opt.number("a"), sigma = opt.number("sigma"), b = opt.number("b");
  const double t = opt.number("t"), s = opt.number("s");
  if (!(b > 0.0)) throw ValidationError("option 'b' must be positive");
  const long levels = opt.integer("levels"), seeds = opt.integer("seeds");
  if (levels < 2 || levels > 10) throw ValidationError("option 'levels' must be in [2, 10]");
  if (seeds < 1) throw ValidationError("option 'seeds' must be positive");
  const ConvolutionRule rule = parse_rule(opt.text("rule"));
  const double T_trunc = default_truncation(b);
  // dt is the coarsest level so that t and s stay on every grid.
  const double coarse_dt = ctx.config.dt;
  const auto cocycle = linear_cocycle(a, sigma, rule);
  const Vector x = Vector::Constant(1, opt.number("x"));

  std::vector<std::vector<double>> cr(static_cast<std::size_t>(levels)), sr(static_cast<std::size_t>(levels));
  for (long i = 0; i < seeds; ++i) {
    const auto seed_i = derive_seed(ctx.seed, static_cast<std::uint64_t>(i));
    const auto cp = sample_path(seed_i, 1, 0.0, t + s, coarse_dt);
    const auto sp = sample_path(seed_i, 1, -T_trunc, t, coarse_dt);
    for (long k = 0; k < levels; ++k) {
      const int factor = 1 << k;
      const auto cpk = factor == 1 ? cp : refine(cp, factor);
      const auto spk = factor == 1 ? sp : refine(sp, factor);
      cr[static_cast<std::size_t>(k)].push_back(cocycle_check(cocycle, t, s, x, cpk));
      sr[static_cast<std::size_t>(k)].push_back(stationary_orbit_check(spk, b, t, T_trunc, rule));
    }
  }
  Table ct{"cocycle", {"dt", "median_residual", "mean_residual"}, {}};
  Table st{"stationary_orbit", {"dt", "median_residual", "mean_residual"}, {}};
  std::vector<double> dts, cmed, smed;
  json records = json::array();
  for (long k = 0; k < levels; ++k) {
    const auto& c = cr[static_cast<std::size_t>(k)];
    const auto& o = sr[static_cast<std::size_t>(k)];
    const double dt = coarse_dt / std::pow(2.0, static_cast<double>(k));
    dts.push_back(dt);
    cmed.push_back(median(c));
    smed.push_back(median(o));
    const double cmean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    const double smean = std::accumulate(o.begin(), o.end(), 0.0) / static_cast<double>(o.size());
    ct.rows.push_back({dt, cmed.back(), cmean});
    st.rows.push_back({dt, smed.back(), smean});
    records.push_back(json{{"check", "cocycle"}, {"t", t}, {"s", s}, {"dt", dt}, {"residual", cmed.back()}});
    records.push_back(json{{"check", "stationary_orbit"}, {"t", t}, {"s", 0.0}, {"dt", dt}, {"residual", smed.back()}});
  }

  // Var(Y) over n_paths seeds on the dt grid.
  double sum = 0.0, sum2 = 0.0;
  const std::size_t n = ctx.config.n_paths;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = ou_stationary_orbit(sample_path(derive_seed(ctx.seed, i), 1, -T_trunc, 0.0, coarse_dt), b,
                                         T_trunc);
    sum += y * y;
    sum2 += y * y * y * y;
  }
  const double mean = sum / static_cast<double>(n);
  const double nd = static_cast<double>(n);
  const double se = n > 1 ? std::sqrt(std::max(0.0, sum2 - nd * mean * mean) / (nd - 1.0) / nd) : 0.0;
  json out;
  out["cocycle_order"] = log_slope(dts, cmed);
  out["stationary_orbit_order"] = log_slope(dts, smed);
  out["var_y"] = mean;
  out["var_y_se"] = se;
  out["var_y_target"] = 1.0 / (2.0 * b);
  out["var_y_agrees"] = std::abs(mean - 1.0 / (2.0 * b)) <= 3.0 * se;
  out["truncation"] = T_trunc;
  out["records"] = records;
  return {{ct, st}, out};
}

// ---------------------------------------------------------------- registry

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct Registered {
  Experiment exp;
  std::function<void(RunConfig&, const Options&)> resolve;
};

const std::vector<Registered>& registry() {
  static const std::vector<Registered> r = [] {
    std::vector<Registered> v{
        {{"simulate", "ensemble moments of a builtin model", {}, run_simulate},
         [](RunConfig& c, const Options&) { resolve_model(c, "langevin"); }},
        {{"order", "strong convergence order against a closed form",
          {{"levels", "6"}, {"schemes", "euler_maruyama, milstein"}}, run_order},
         [](RunConfig& c, const Options&) { resolve_model(c, "population"); }},
        {{"calculus", "Ito isometries, Doob bound and the Stratonovich gap",
          {{"integrands", "1, t, W"}, {"lambda", "1"}, {"gap_levels", "4"}}, run_calculus},
         [](RunConfig& c, const Options&) {
           if (c.model) throw ValidationError("calculus takes no [model] section");
         }},
        {{"moments", "energy balance, error growth and Lorenz bounds",
          {{"check", "energy"}, {"form", "as_stated"}}, run_moments},
         resolve_moments},
        {{"exit", "escape probability, residence time and Monte Carlo exits",
          {{"mc", "true"}, {"q", "0.5"}, {"bridge", "false"}, {"t_max", "100"}, {"bootstrap", "1000"},
           {"stencil", "automatic"}},
          run_exit},
         resolve_exit},
        {{"manifold", "tangency, characteristics and invariance of a manifold",
          {{"manifold", "circle"}, {"radius", "1"}, {"points", "360"}, {"halvings", "2"}, {"curves", "10"},
           {"char_dt", "0.01"}, {"scheme", "milstein"}},
          run_manifold},
         resolve_manifold},
        {{"rds", "cocycle and stationary-orbit identities",
          {{"a", "1"}, {"sigma", "1"}, {"b", "1"}, {"t", "0.5"}, {"s", "0.7"}, {"x", "0.3"}, {"levels", "4"},
           {"seeds", "50"}, {"rule", "pathwise_left_point"}},
          run_rds},
         [](RunConfig& c, const Options&) {
           if (c.model) throw ValidationError("rds takes no [model] section");
         }},
    };
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.exp.name < b.exp.name; });
    return v;
  }();
  return r;
}

const Registered& find_registered(const std::string& name) {
  for (const auto& r : registry())
    if (r.exp.name == name) return r;
  throw LookupError("unknown experiment '" + name + "'; did you mean '" + nearest_experiment(name) + "'?");
}

void write_csv(const std::filesystem::path& file, const std::string& header, const Table& t) {
  std::ofstream o(file, std::ios::binary);
  if (!o) throw Error("cannot write " + file.string());
  std::istringstream h(header);
  for (std::string line; std::getline(h, line);) o << (line.empty() ? "#" : "# ") << line << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) o << (i ? "," : "") << t.columns[i];
  o << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) o << ",";
      std::visit(
          [&o](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) o << format_number(v);
            else o << v;
          },
          row[i]);
    }
    o << "\n";
  }
  if (!o) throw Error("write failed for " + file.string());
}

json config_json(const RunConfig& c, std::uint64_t seed) {
  json j;
  j["experiment"] = c.experiment;
  j["seed"] = seed;
  j["n_paths"] = c.n_paths;
  j["dt"] = c.dt;
  j["t_final"] = c.t_final;
  j["scheme"] = to_string(c.scheme);
  if (c.model) {
    json params = json::object();
    for (const auto& [k, v] : c.model->params) params[k] = v;
    j["model"] = json{{"name", c.model->name}, {"params", params}, {"x0", c.model->x0}};
  }
  if (c.domain) {
    std::vector<std::string> gamma;
    for (Face f : c.domain->gamma) gamma.push_back(to_string(f));
    j["domain"] = json{{"bounds", c.domain->bounds}, {"h", c.domain->h}, {"gamma", gamma}};
  }
  j["options"] = c.options;
  return j;
}

}  // namespace

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> e = [] {
    std::vector<Experiment> v;
    for (const auto& r : registry()) v.push_back(r.exp);
    return v;
  }();
  return e;
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> names;
  for (const auto& e : experiments()) names.push_back(e.name);
  return names;
}

std::string nearest_experiment(const std::string& name) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& e : experiments()) {
    const auto d = edit_distance(name, e.name);
    if (d < best_d) best = e.name, best_d = d;
  }
  return best;
}

const Experiment& find_experiment(const std::string& name) { return find_registered(name).exp; }

std::string artifact_config(const RunConfig& config, std::uint64_t seed) {
  RunConfig c = config;
  c.seed = seed;
  return serialize(c, SerializeMode::artifact);
}

Manifest run_experiment(const RunConfig& input, std::uint64_t seed, int workers) {
  const auto start = std::chrono::steady_clock::now();
  validate_run(input);
  if (input.experiment.empty()) throw ValidationError("no experiment given");
  if (workers < 1) throw ValidationError("workers must be at least 1");
  const auto& reg = find_registered(input.experiment);

  RunConfig config = input;
  config.seed = seed;
  const Options opts(reg.exp.option_defaults, config.options, config.experiment);
  config.options = opts.values();
  reg.resolve(config, opts);

  const RunContext ctx{config, seed, workers};
  const ExperimentResult result = reg.exp.run(ctx, opts);

  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  Manifest m;
  m.experiment = config.experiment;
  m.directory = dir.string();
  m.seed = seed;
  m.workers = workers;
  m.params = config_json(config, seed);

  const std::string header = artifact_config(config, seed);
  if (config.format != OutputFormat::json) {
    for (const auto& t : result.tables) {
      const std::string name = config.experiment + "_" + t.name + ".csv";
      write_csv(dir / name, header, t);
      m.files.push_back(name);
    }
  }
  if (config.format != OutputFormat::csv) {
    json j;
    j["config"] = m.params;
    j["seed"] = seed;
    j["summary"] = result.summary;
    json tables = json::object();
    for (const auto& t : result.tables) {
      json rows = json::array();
      for (const auto& row : t.rows) {
        json r = json::object();
        for (std::size_t i = 0; i < row.size(); ++i) std::visit([&](const auto& v) { r[t.columns[i]] = v; }, row[i]);
        rows.push_back(std::move(r));
      }
      tables[t.name] = std::move(rows);
    }
    j["tables"] = std::move(tables);
    const std::string name = config.experiment + ".json";
    std::ofstream o(dir / name, std::ios::binary);
    o << j.dump(2) << "\n";
    if (!o) throw Error("write failed for " + (dir / name).string());
    m.files.push_back(name);
  }

  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json mj;
  mj["experiment"] = m.experiment;
  mj["files"] = m.files;
  mj["params"] = m.params;
  mj["seed"] = seed;
  mj["workers"] = workers;
  mj["wall_time_s"] = m.wall_time_s;
  mj["summary"] = result.summary;
  std::ofstream o(dir / "manifest.json", std::ios::binary);
  o << mj.dump(2) << "\n";
  if (!o) throw Error("write failed for manifest.json");
  return m;
}

}  // namespace stokit::harness
