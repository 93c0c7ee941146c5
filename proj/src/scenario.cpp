#include "prospectq/scenario.hpp"

#include "prospectq/parallel.hpp"
#include "prospectq/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace prospectq {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::converge: return "converge";
    case Scenario::census: return "census";
    case Scenario::regions: return "regions";
    case Scenario::fig2: return "fig2";
    case Scenario::fig3: return "fig3";
    case Scenario::fig5: return "fig5";
    case Scenario::multi_eq_51: return "multi_eq_51";
    case Scenario::compare_alt: return "compare_alt";
    case Scenario::compare_classical: return "compare_classical";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  for (Scenario s : {Scenario::converge, Scenario::census, Scenario::regions, Scenario::fig2, Scenario::fig3,
                     Scenario::fig5, Scenario::multi_eq_51, Scenario::compare_alt, Scenario::compare_classical})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown scenario '" + name + "'");
}

namespace {

// Leaf types of the schema: "int", "uint", "number", "bool", "string",
// "numbers" (array of numbers); nested objects are blocks.
const json& regime_schema() {
  static const json schema = {
      {"label", "string"},
      {"mdp", {{"file", "string"}, {"s", "int"}, {"r", "int"}, {"k_min", "number"}, {"k_max", "number"},
               {"alpha", "number"}, {"seed", "uint"}}},
      {"curve", {{"form", "string"}, {"L", "number"}, {"gamma", "number"}, {"x0", "number"}, {"tail", "number"},
                 {"x", "numbers"}, {"u", "numbers"}}},
      {"noise", {{"c", "number"}}},
      {"mode", "string"},
      {"backend", {{"kind", "string"}, {"order", "int"}, {"samples", "int"}, {"seed", "uint"}}},
      {"learner", {{"epsilon", "number"}, {"block", "int"}, {"iters", "int"}, {"runs", "int"},
                   {"init", {{"relative_to", "string"}, {"lo", "number"}, {"hi", "number"}}},
                   {"resample_control", "bool"}, {"error_window", "int"}}},
      {"dynamics", {{"dt", "number"}, {"t_max", "number"}, {"tol", "number"}, {"interior_seeds", "int"},
                    {"ode_seeds", "bool"}, {"newton_hunt", "bool"}}},
      {"probes", {{"per_equilibrium", "int"}, {"radius", "number"}, {"iters", "int"}, {"block", "int"},
                  {"clock_offset", "int"}}}};
  return schema;
}

void check_type(const json& v, const std::string& type, const std::string& path) {
  bool ok = false;
  if (type == "int") ok = v.is_number_integer();
  else if (type == "uint") ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  else if (type == "number") ok = v.is_number();
  else if (type == "bool") ok = v.is_boolean();
  else if (type == "string") ok = v.is_string();
  else if (type == "numbers") ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
  if (!ok) throw ConfigError(path + ": expected " + type);
}

void check_keys(const json& obj, const json& schema, const std::string& path) {
  if (!obj.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError(key_path + ": unknown key");
    const json& sub = schema.at(it.key());
    if (sub.is_object())
      check_keys(it.value(), sub, key_path);
    else
      check_type(it.value(), sub.get<std::string>(), key_path);
  }
}

template <class T>
T get_or(const json& block, const char* key, T fallback) {
  return block.contains(key) ? block.at(key).get<T>() : fallback;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

CurveForm curve_form_from(const std::string& name) {
  if (name == "logistic") return CurveForm::logistic;
  if (name == "piecewise_steep") return CurveForm::piecewise_steep;
  if (name == "tabulated") return CurveForm::tabulated;
  throw ConfigError("curve.form: unknown form '" + name + "'");
}

Backend backend_from(const json& b, const std::string& path) {
  const std::string kind = get_or<std::string>(b, "kind", "quadrature");
  if (kind == "quadrature") {
    const int order = get_or<int>(b, "order", 16);
    require(order >= 1 && order <= 512, path + ".order: must lie in [1, 512]");
    return Backend::quadrature(order);
  }
  if (kind == "mc" || kind == "monte_carlo") {
    const auto samples = get_or<std::int64_t>(b, "samples", 100000);
    require(samples >= 1, path + ".samples: must be >= 1");
    return Backend::monte_carlo(samples, get_or<std::uint64_t>(b, "seed", 0));
  }
  if (kind == "exact") return Backend::exact();
  throw ConfigError(path + ".kind: unknown backend '" + kind + "'");
}

json backend_echo(const Backend& b) {
  switch (b.kind) {
    case Backend::Kind::exact_c0: return {{"kind", "exact"}};
    case Backend::Kind::quadrature: return {{"kind", "quadrature"}, {"order", b.order}};
    case Backend::Kind::monte_carlo: return {{"kind", "mc"}, {"samples", b.samples}, {"seed", b.seed}};
  }
  return {};
}

// Resolves one regime's raw blocks (already merged) into a Regime plus its
// fully defaulted echo.
std::pair<Regime, json> resolve_regime(const json& raw, const std::string& label, const std::string& path) {
  Regime g;
  g.label = label;
  json echo;
  echo["label"] = label;

  const json mdp = raw.value("mdp", json::object());
  if (mdp.contains("file")) {
    for (const char* k : {"s", "r", "k_min", "k_max", "alpha", "seed"})
      require(!mdp.contains(k), path + "mdp." + k + ": not allowed together with mdp.file");
    g.mdp.file = mdp.at("file").get<std::string>();
    echo["mdp"] = {{"file", g.mdp.file}};
  } else {
    g.mdp.s = get_or<int>(mdp, "s", 20);
    g.mdp.r = get_or<int>(mdp, "r", 20);
    g.mdp.k_min = get_or<double>(mdp, "k_min", 2.0);
    g.mdp.k_max = get_or<double>(mdp, "k_max", 5.0);
    g.mdp.alpha = get_or<double>(mdp, "alpha", 0.5);
    g.mdp.seed = get_or<std::uint64_t>(mdp, "seed", 1);
    require(g.mdp.s >= 1 && g.mdp.r >= 1, path + "mdp: s and r must be >= 1");
    require(g.mdp.alpha > 0.0 && g.mdp.alpha < 1.0, path + "mdp.alpha: must lie in (0, 1)");
    require(g.mdp.k_min >= 0.0 && g.mdp.k_min < g.mdp.k_max, path + "mdp: need 0 <= k_min < k_max");
    echo["mdp"] = {{"s", g.mdp.s}, {"r", g.mdp.r}, {"k_min", g.mdp.k_min}, {"k_max", g.mdp.k_max},
                   {"alpha", g.mdp.alpha}, {"seed", g.mdp.seed}};
  }

  const json curve = raw.value("curve", json::object());
  g.curve.form = curve_form_from(get_or<std::string>(curve, "form", "logistic"));
  switch (g.curve.form) {
    case CurveForm::logistic:
      for (const char* k : {"tail", "x", "u"})
        require(!curve.contains(k), path + "curve." + k + ": not used by the logistic form");
      g.curve.L = get_or<double>(curve, "L", 10.0);
      g.curve.gamma = get_or<double>(curve, "gamma", 1.0);
      g.curve.x0 = get_or<double>(curve, "x0", 5.0);
      echo["curve"] = {{"form", "logistic"}, {"L", g.curve.L}, {"gamma", g.curve.gamma}, {"x0", g.curve.x0}};
      break;
    case CurveForm::piecewise_steep:
      for (const char* k : {"gamma", "x", "u"})
        require(!curve.contains(k), path + "curve." + k + ": not used by the piecewise_steep form");
      require(curve.contains("L") && curve.contains("x0"), path + "curve: piecewise_steep needs L and x0");
      g.curve.L = curve.at("L").get<double>();
      g.curve.x0 = curve.at("x0").get<double>();
      g.curve.tail = get_or<double>(curve, "tail", 1e-3);
      echo["curve"] = {{"form", "piecewise_steep"}, {"L", g.curve.L}, {"x0", g.curve.x0}, {"tail", g.curve.tail}};
      break;
    case CurveForm::tabulated:
      for (const char* k : {"L", "gamma", "x0", "tail"})
        require(!curve.contains(k), path + "curve." + k + ": not used by the tabulated form");
      require(curve.contains("x") && curve.contains("u"), path + "curve: tabulated needs x and u");
      g.curve.xs = curve.at("x").get<std::vector<double>>();
      g.curve.us = curve.at("u").get<std::vector<double>>();
      echo["curve"] = {{"form", "tabulated"}, {"x", g.curve.xs}, {"u", g.curve.us}};
      break;
  }

  const json noise = raw.value("noise", json::object());
  g.c = get_or<double>(noise, "c", 0.01);
  require(g.c >= 0.0, path + "noise.c: must be >= 0");
  echo["noise"] = {{"c", g.c}};

  try {
    g.mode = mode_from_string(raw.value("mode", std::string("future")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + "mode: " + e.what());
  }
  echo["mode"] = to_string(g.mode);

  g.backend = raw.contains("backend") ? backend_from(raw.at("backend"), path + "backend")
                                      : default_backend(g.mdp.r, g.c);
  echo["backend"] = backend_echo(g.backend);

  const json lr = raw.value("learner", json::object());
  g.learner.epsilon = get_or<double>(lr, "epsilon", 0.05);
  g.learner.block = get_or<int>(lr, "block", 100);
  g.learner.iters = get_or<std::int64_t>(lr, "iters", 200000);
  g.learner.runs = get_or<int>(lr, "runs", 1);
  g.learner.resample_control = get_or<bool>(lr, "resample_control", false);
  g.learner.error_window = get_or<int>(lr, "error_window", 1000);
  require(g.learner.epsilon > 0.0 && g.learner.epsilon < 1.0, path + "learner.epsilon: must lie in (0, 1)");
  require(g.learner.block >= 1, path + "learner.block: must be >= 1");
  require(g.learner.iters >= 1, path + "learner.iters: must be >= 1");
  require(g.learner.runs >= 1, path + "learner.runs: must be >= 1");
  require(g.learner.error_window >= 1, path + "learner.error_window: must be >= 1");
  echo["learner"] = {{"epsilon", g.learner.epsilon}, {"block", g.learner.block}, {"iters", g.learner.iters},
                     {"runs", g.learner.runs}, {"resample_control", g.learner.resample_control},
                     {"error_window", g.learner.error_window}};
  if (lr.contains("init")) {
    const json& in = lr.at("init");
    InitSpec init;
    init.relative_to = get_or<std::string>(in, "relative_to", "absolute");
    require(init.relative_to == "absolute" || init.relative_to == "k_min" || init.relative_to == "K",
            path + "learner.init.relative_to: must be absolute, k_min or K");
    require(in.contains("lo") && in.contains("hi"), path + "learner.init: needs lo and hi");
    init.lo = in.at("lo").get<double>();
    init.hi = in.at("hi").get<double>();
    require(init.lo <= init.hi, path + "learner.init: lo must not exceed hi");
    g.learner.init = init;
    echo["learner"]["init"] = {{"relative_to", init.relative_to}, {"lo", init.lo}, {"hi", init.hi}};
  } else {
    echo["learner"]["init"] = nullptr;
  }

  const json dy = raw.value("dynamics", json::object());
  g.dynamics.dt = get_or<double>(dy, "dt", 0.05);
  g.dynamics.t_max = get_or<double>(dy, "t_max", 500.0);
  g.dynamics.tol = get_or<double>(dy, "tol", 1e-8);
  g.dynamics.interior_seeds = get_or<int>(dy, "interior_seeds", 20);
  g.dynamics.ode_seeds = get_or<bool>(dy, "ode_seeds", true);
  g.dynamics.newton_hunt = get_or<bool>(dy, "newton_hunt", true);
  require(g.dynamics.dt > 0.0 && g.dynamics.t_max > 0.0 && g.dynamics.tol > 0.0,
          path + "dynamics: dt, t_max and tol must be positive");
  require(g.dynamics.interior_seeds >= 0, path + "dynamics.interior_seeds: must be >= 0");
  echo["dynamics"] = {{"dt", g.dynamics.dt}, {"t_max", g.dynamics.t_max}, {"tol", g.dynamics.tol},
                      {"interior_seeds", g.dynamics.interior_seeds}, {"ode_seeds", g.dynamics.ode_seeds},
                      {"newton_hunt", g.dynamics.newton_hunt}};

  const json pr = raw.value("probes", json::object());
  g.probes.per_equilibrium = get_or<int>(pr, "per_equilibrium", 2);
  g.probes.radius = get_or<double>(pr, "radius", 0.05);
  g.probes.iters = get_or<std::int64_t>(pr, "iters", 2000000);
  g.probes.block = get_or<int>(pr, "block", 1);
  g.probes.clock_offset = get_or<std::int64_t>(pr, "clock_offset", 1000);
  require(g.probes.clock_offset >= 0, path + "probes.clock_offset: must be >= 0");
  require(g.probes.per_equilibrium >= 1 && g.probes.radius > 0.0 && g.probes.iters >= 1 && g.probes.block >= 1,
          path + "probes: counts and radius must be positive");
  echo["probes"] = {{"per_equilibrium", g.probes.per_equilibrium}, {"radius", g.probes.radius},
                    {"iters", g.probes.iters}, {"block", g.probes.block},
                    {"clock_offset", g.probes.clock_offset}};
  return {g, echo};
}

fs::path resolve_file(const std::string& file, const fs::path& base_dir) {
  const fs::path p(file);
  if (p.is_absolute()) return p;
  for (fs::path dir = base_dir; !dir.empty(); dir = dir.parent_path()) {
    if (fs::exists(dir / p)) return dir / p;
    if (dir == dir.parent_path()) break;
  }
  return p;
}

}  // namespace

std::string config_hash(const json& echo) {
  json canon = echo;
  canon.erase("output");
  const std::string text = canon.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RegimeModel build_regime(const Regime& g, const fs::path& base_dir) {
  std::shared_ptr<const Mdp> mdp;
  if (!g.mdp.file.empty()) {
    const fs::path p = resolve_file(g.mdp.file, base_dir);
    if (!fs::exists(p)) throw ConfigError("mdp.file: cannot open '" + g.mdp.file + "'");
    mdp = std::make_shared<Mdp>(load_instance(p.string()));
  } else {
    mdp = std::make_shared<Mdp>(generate_random_mdp(g.mdp.s, g.mdp.r, g.mdp.k_min, g.mdp.k_max, g.mdp.alpha, g.mdp.seed));
  }
  auto curve = [&] {
    switch (g.curve.form) {
      case CurveForm::logistic: return SCurve::logistic(g.curve.L, g.curve.gamma, g.curve.x0);
      case CurveForm::piecewise_steep: return SCurve::piecewise_steep(g.curve.L, g.curve.x0, mdp->alpha(), g.curve.tail);
      case CurveForm::tabulated: return SCurve::tabulated(g.curve.xs, g.curve.us);
    }
    throw ConfigError("curve.form: unknown");
  }();
  NoiseModel noise(g.c);
  const MdpConstants mc = MdpConstants::of(*mdp);
  RegionPoints pts = find_g_and_b1(curve, mc, g.c, critical_points(curve, mc.alpha, g.c, mc.K));
  return {mdp, curve, noise, pts};
}

Operator make_operator(const RegimeModel& model, const Regime& g, Mode mode) {
  return Operator(model.mdp, mode, model.curve, model.noise, g.learner.epsilon, g.backend);
}

SearchOptions search_options(const Regime& g, std::uint64_t seed) {
  SearchOptions so;
  so.interior_seeds = g.dynamics.interior_seeds;
  so.seed = seed;
  so.tol = g.dynamics.tol;
  so.ode_seeds = g.dynamics.ode_seeds;
  so.newton_hunt = g.dynamics.newton_hunt;
  so.ode.dt = g.dynamics.dt;
  so.ode.t_max = g.dynamics.t_max;
  return so;
}

LearnerConfig learner_config(const Regime& g, const Mdp& m, Mode mode, std::uint64_t seed) {
  LearnerConfig lc;
  lc.mode = mode;
  lc.epsilon = g.learner.epsilon;
  lc.stepsize_block = g.learner.block;
  lc.max_iters = g.learner.iters;
  lc.seed = seed;
  lc.error_window = g.learner.error_window;
  lc.resample_control = g.learner.resample_control;
  const Box box = mode == Mode::total_distorted ? m.total_box() : m.box();
  if (g.learner.init) {
    const InitSpec& in = *g.learner.init;
    const double ref = in.relative_to == "K" ? m.K() : in.relative_to == "k_min" ? m.k_min() : 0.0;
    Box ib{std::max(box.lo, ref + in.lo), std::min(box.hi, ref + in.hi)};
    if (ib.lo > ib.hi) throw ConfigError("learner.init: box does not meet the mode's box");
    lc.init_box = ib;
  }
  return lc;
}

ExperimentConfig parse_config(const json& raw, const fs::path& base_dir) {
  json top_schema = regime_schema();
  top_schema.erase("label");
  top_schema["scenario"] = "string";
  top_schema["name"] = "string";
  top_schema["seed"] = "uint";
  top_schema["output"] = "string";
  if (!raw.is_object()) throw ConfigError("config: expected an object");
  json plain = raw;
  plain.erase("regimes");
  check_keys(plain, top_schema, "");
  require(raw.contains("scenario"), "scenario: required");

  ExperimentConfig cfg;
  cfg.scenario = scenario_from_string(raw.at("scenario").get<std::string>());
  cfg.name = get_or<std::string>(raw, "name", to_string(cfg.scenario));
  require(!cfg.name.empty() && cfg.name.find('/') == std::string::npos, "name: must be a nonempty file stem");
  cfg.seed = get_or<std::uint64_t>(raw, "seed", 1);
  cfg.output = get_or<std::string>(raw, "output", "out");
  cfg.base_dir = base_dir;

  json base = raw;
  for (const char* k : {"scenario", "name", "seed", "output", "regimes"}) base.erase(k);

  std::vector<std::pair<std::string, json>> raws;
  if (raw.contains("regimes")) {
    const json& list = raw.at("regimes");
    require(list.is_array() && !list.empty(), "regimes: expected a nonempty array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string path = "regimes[" + std::to_string(k) + "]";
      check_keys(list[k], regime_schema(), path);
      json merged = base;
      json patch = list[k];
      const std::string label = get_or<std::string>(patch, "label", "regime" + std::to_string(k));
      patch.erase("label");
      // A file-backed regime replaces the generated instance entirely and vice versa.
      if (patch.contains("mdp") && merged.contains("mdp") &&
          patch.at("mdp").contains("file") != merged.at("mdp").contains("file"))
        merged.erase("mdp");
      if (patch.contains("curve") && patch.at("curve").contains("form") && merged.contains("curve") &&
          merged.at("curve").value("form", std::string("logistic")) != patch.at("curve").at("form"))
        merged.erase("curve");
      merged.merge_patch(patch);
      raws.emplace_back(label, merged);
    }
  } else {
    raws.emplace_back("main", base);
  }

  cfg.echo = {{"scenario", to_string(cfg.scenario)}, {"name", cfg.name}, {"seed", cfg.seed}, {"output", cfg.output}};
  cfg.echo["regimes"] = json::array();
  for (std::size_t k = 0; k < raws.size(); ++k) {
    const std::string path = raw.contains("regimes") ? "regimes[" + std::to_string(k) + "]." : "";
    auto [regime, echo] = resolve_regime(raws[k].second, raws[k].first, path);
    try {
      // Build once so that invalid instances or curves surface as config errors.
      const RegimeModel model = build_regime(regime, base_dir);
      (void)make_operator(model, regime, regime.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path + "invalid regime '" + regime.label + "': " + e.what());
    } catch (const std::runtime_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError(path + "invalid regime '" + regime.label + "': " + e.what());
    }
    cfg.regimes.push_back(std::move(regime));
    cfg.echo["regimes"].push_back(std::move(echo));
  }

  if (cfg.scenario == Scenario::fig3 || cfg.scenario == Scenario::fig5)
    require(cfg.regimes.size() == 2, "regimes: " + to_string(cfg.scenario) + " needs exactly two regimes");
  if (cfg.scenario == Scenario::compare_classical || cfg.scenario == Scenario::compare_alt ||
      cfg.scenario == Scenario::census || cfg.scenario == Scenario::regions ||
      cfg.scenario == Scenario::multi_eq_51)
    for (const auto& g : cfg.regimes)
      require(g.mode != Mode::classical || cfg.scenario == Scenario::compare_alt,
              "mode: " + to_string(cfg.scenario) + " needs a distorted mode");
  cfg.hash = config_hash(cfg.echo);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(raw, fs::absolute(path).parent_path());
}

ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<std::string> backend) {
  ExperimentConfig out = cfg;
  if (seed) {
    out.seed = *seed;
    out.echo["seed"] = *seed;
  }
  if (backend) {
    Backend b;
    if (*backend == "quadrature")
      b = Backend::quadrature(16);
    else if (*backend == "mc" || *backend == "monte_carlo")
      b = Backend::monte_carlo(100000, out.seed);
    else
      throw ConfigError("--backend: expected quadrature or mc");
    for (std::size_t k = 0; k < out.regimes.size(); ++k) {
      Backend bk = b;
      if (bk.kind == Backend::Kind::quadrature && out.regimes[k].backend.kind == Backend::Kind::quadrature)
        bk.order = out.regimes[k].backend.order;
      if (bk.kind == Backend::Kind::monte_carlo && out.regimes[k].backend.kind == Backend::Kind::monte_carlo)
        bk = out.regimes[k].backend;
      out.regimes[k].backend = bk;
      out.echo["regimes"][k]["backend"] = backend_echo(bk);
    }
  }
  out.hash = config_hash(out.echo);
  return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double sup_dist(const Vec& x, const Vec& y) { return (x - y).cwiseAbs().maxCoeff(); }

class Emitter {
 public:
  Emitter(const ExperimentConfig& cfg, fs::path dir, ScenarioResult& result)
      : cfg_(cfg), dir_(std::move(dir)), result_(result) {}

  void json_file(const std::string& artifact, json body) {
    body["config_hash"] = cfg_.hash;
    write(artifact + ".json", body.dump(2) + "\n");
  }
  void text_file(const std::string& artifact, const std::string& ext, const std::string& body) {
    write(artifact + "." + ext, body);
  }

 private:
  void write(const std::string& leaf, const std::string& content) {
    const fs::path path = dir_ / (cfg_.name + "-" + cfg_.hash + "-" + leaf);
    write_atomic(path, content);
    result_.artifacts.push_back(path);
  }

  const ExperimentConfig& cfg_;
  fs::path dir_;
  ScenarioResult& result_;
};

std::string slug(const std::string& s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  return out;
}

struct RegimeRun {
  RegimeModel model;
  Census census;
  RegionReport report;
  OrderStructure order;
};

RegimeRun census_for(const ExperimentConfig& cfg, const Regime& g, std::size_t index, Mode mode) {
  RegimeRun rr{build_regime(g, cfg.base_dir), {}, {}, {}};
  const Operator op = make_operator(rr.model, g, mode);
  rr.census = find_equilibria(op, search_options(g, substream_seed(cfg.seed, index)));
  rr.report = region_report(rr.census, rr.model.points, op, false);
  rr.order = order_structure(rr.census.equilibria);
  return rr;
}

void collect_theorem_failures(const RegionReport& rep, const std::string& label, ScenarioResult& result) {
  for (const auto& ch : rep.checks)
    if (!ch.passed) result.failures.push_back(label + ": theorem check " + ch.name + " failed (" + ch.detail + ")");
}

json census_json(const RegimeRun& rr) {
  json j = to_json(rr.census, rr.order);
  j["regions"] = to_json(rr.report);
  return j;
}

const Equilibrium* greatest_of(const Census& c) {
  for (const auto& e : c.equilibria)
    if (e.is_maximal) return &e;
  return nullptr;
}

const Equilibrium* least_of(const Census& c) {
  for (const auto& e : c.equilibria)
    if (e.is_minimal) return &e;
  return nullptr;
}

void run_converge(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  json runs = json::array();
  for (std::size_t k = 0; k < cfg.regimes.size(); ++k) {
    const Regime& g = cfg.regimes[k];
    const RegimeModel model = build_regime(g, cfg.base_dir);
    const Operator op = make_operator(model, g, g.mode);
    std::vector<RunRecord> recs(g.learner.runs);
    std::vector<OdeTrajectory> odes(g.learner.runs);
    parallel_for(recs.size(), [&](std::size_t n) {
      recs[n] = run(*model.mdp, model.curve, model.noise,
                     learner_config(g, *model.mdp, g.mode, substream_seed(cfg.seed, 1000 * k + n)));
      OdeOptions oo{g.dynamics.dt, g.dynamics.t_max, g.dynamics.tol, 1e-6, 0};
      odes[n] = integrate(recs[n].initial_q, op, oo);
    });
    std::ostringstream csv;
    write_error_csv(recs[0], csv);
    out.text_file(slug(g.label) + "-errors", "csv", csv.str());
    for (std::size_t n = 0; n < recs.size(); ++n) {
      const double dist = sup_dist(recs[n].final_q.values, odes[n].final_state());
      json j = summary_json(recs[n], learner_config(g, *model.mdp, g.mode, substream_seed(cfg.seed, 1000 * k + n)));
      j["regime"] = g.label;
      j["ode"] = {{"final_q", to_std(odes[n].final_state())},
                  {"terminal_residual", odes[n].terminal_residual},
                  {"converged", odes[n].converged},
                  {"t_end", odes[n].times.back()}};
      j["sup_distance"] = dist;
      runs.push_back(j);
    }
  }
  out.json_file("converge", {{"runs", runs}});
  result.summary["runs"] = runs.size();
}

void run_census(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result, bool regions) {
  for (std::size_t k = 0; k < cfg.regimes.size(); ++k) {
    const Regime& g = cfg.regimes[k];
    const RegimeRun rr = census_for(cfg, g, k, g.mode);
    json body = census_json(rr);
    body["regime"] = g.label;
    out.json_file(slug(g.label) + (regions ? "-regions" : "-census"), body);
    result.summary[g.label] = {{"census_size", rr.census.equilibria.size()},
                               {"third_equilibrium", rr.order.third_status}};
    if (regions) collect_theorem_failures(rr.report, g.label, result);
  }
}

void run_fig2(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  const Regime& g = cfg.regimes.front();
  const RegimeModel model = build_regime(g, cfg.base_dir);
  const LearnerConfig lc = learner_config(g, *model.mdp, g.mode, substream_seed(cfg.seed, 0));
  const RunRecord rec = run(*model.mdp, model.curve, model.noise, lc);
  std::ostringstream csv;
  write_error_csv(rec, csv);
  out.text_file("errors", "csv", csv.str());
  const auto w = static_cast<std::size_t>(g.learner.error_window);
  const std::size_t n = rec.error_series.size();
  const double first = rec.moving_avg[std::min(w, n) - 1];
  const double last = rec.moving_avg.back();
  json summary = summary_json(rec, lc);
  summary["first_window_mean"] = first;
  summary["last_window_mean"] = last;
  out.json_file("summary", summary);
  result.summary = {{"first_window_mean", first}, {"last_window_mean", last}};
  if (!(last < 0.1 * first))
    result.failures.push_back("fig2: final window mean " + std::to_string(last) +
                              " is not below 10% of the initial window mean " + std::to_string(first));
}

void run_fig3(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  for (std::size_t k = 0; k < 2; ++k) {
    const Regime& g = cfg.regimes[k];
    const RegimeRun rr = census_for(cfg, g, k, g.mode);
    json body = census_json(rr);
    body["regime"] = g.label;
    out.json_file(slug(g.label) + "-census", body);
    const std::size_t n = rr.census.equilibria.size();
    result.summary[g.label] = {{"census_size", n}};
    collect_theorem_failures(rr.report, g.label, result);
    if (k == 0 && n != 1) result.failures.push_back(g.label + ": expected exactly 1 equilibrium, found " + std::to_string(n));
    if (k == 1 && n < 2) result.failures.push_back(g.label + ": expected at least 2 equilibria, found " + std::to_string(n));
  }
}

void run_fig5(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  for (std::size_t k = 0; k < cfg.regimes.size(); ++k) {
    const Regime& g = cfg.regimes[k];
    const RegimeRun rr = census_for(cfg, g, k, g.mode);
    json body = census_json(rr);
    body["regime"] = g.label;
    out.json_file(slug(g.label) + "-regions", body);
    result.summary[g.label] = {{"u1_sufficiency", rr.report.thm13_sufficiency},
                               {"upper_present", rr.report.upper_count > 0},
                               {"census_size", rr.census.equilibria.size()}};
    collect_theorem_failures(rr.report, g.label, result);
    if (rr.report.upper_count == 0) result.failures.push_back(g.label + ": no equilibrium in the upper stable region");
  }
}

void run_multi_eq(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  const Regime& g = cfg.regimes.front();
  const RegimeRun rr = census_for(cfg, g, 0, g.mode);
  json body = census_json(rr);
  out.json_file("census", body);

  std::vector<const Equilibrium*> stable;
  for (const auto& e : rr.census.equilibria)
    if (e.stability == Stability::stable) stable.push_back(&e);
  result.summary["stable_count"] = stable.size();
  if (stable.size() < 3)
    result.failures.push_back("expected at least 3 stable equilibria, found " + std::to_string(stable.size()));

  struct Probe {
    std::size_t target;
    Vec init;
    Vec final_q;
    double distance = 0.0;
  };
  const Box box = g.mode == Mode::total_distorted ? rr.model.mdp->total_box() : rr.model.mdp->box();
  std::vector<Probe> probes;
  for (std::size_t t = 0; t < stable.size(); ++t) {
    for (int p = 0; p < g.probes.per_equilibrium; ++p) {
      Rng rng(substream_seed(cfg.seed, 5000 + probes.size()));
      std::uniform_real_distribution<double> off(-g.probes.radius, g.probes.radius);
      Vec init = stable[t]->q.values;
      for (Eigen::Index n = 0; n < init.size(); ++n) init(n) += off(rng);
      probes.push_back({t, box.clamp(init), {}, 0.0});
    }
  }
  parallel_for(probes.size(), [&](std::size_t n) {
    LearnerConfig lc = learner_config(g, *rr.model.mdp, g.mode, substream_seed(cfg.seed, 9000 + n));
    lc.init = probes[n].init;
    lc.stepsize_block = g.probes.block;
    lc.initial_clock = g.probes.clock_offset;
    lc.max_iters = g.probes.iters;
    lc.record_errors = false;
    const RunRecord rec = run(*rr.model.mdp, rr.model.curve, rr.model.noise, lc);
    probes[n].final_q = rec.final_q.values;
    probes[n].distance = sup_dist(rec.final_q.values, stable[probes[n].target]->q.values);
  });
  json pj = json::array();
  int returned = 0;
  for (const auto& p : probes) {
    const bool ok = p.distance <= g.probes.radius;
    returned += ok;
    pj.push_back({{"target", to_std(stable[p.target]->q.values)},
                  {"init", to_std(p.init)},
                  {"final_q", to_std(p.final_q)},
                  {"sup_distance", p.distance},
                  {"returned", ok}});
    if (!ok)
      result.failures.push_back("basin probe ended " + std::to_string(p.distance) + " from its equilibrium");
  }
  out.json_file("probes", {{"probes", pj}, {"radius", g.probes.radius}});
  result.summary["probes_returned"] = returned;
  result.summary["probes"] = probes.size();
}

void run_compare_alt(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  const Regime& g = cfg.regimes.front();
  const RegimeRun fut = census_for(cfg, g, 0, Mode::future_distorted);
  const RegimeRun tot = census_for(cfg, g, 1, Mode::total_distorted);
  collect_theorem_failures(fut.report, "future", result);
  collect_theorem_failures(tot.report, "total", result);
  json body = {{"future", census_json(fut)}, {"total", census_json(tot)}};
  const Equilibrium* fmax = greatest_of(fut.census);
  const Equilibrium* tmax = greatest_of(tot.census);
  if (fmax && tmax) {
    const Vec diff = tmax->q.values - fmax->q.values;
    body["difference"] = to_std(diff);
    body["min_difference"] = diff.minCoeff();
    result.summary["min_difference"] = diff.minCoeff();
    if (diff.minCoeff() < -1e-3)
      result.failures.push_back("total-mode maximal equilibrium falls below the future-mode one by " +
                                std::to_string(-diff.minCoeff()));
  } else {
    result.failures.push_back("a census has no greatest element");
  }
  out.json_file("compare", body);
}

void run_compare_classical(const ExperimentConfig& cfg, Emitter& out, ScenarioResult& result) {
  const Regime& g = cfg.regimes.front();
  const RegimeRun rr = census_for(cfg, g, 0, g.mode);
  const Mdp& m = *rr.model.mdp;
  const Vec qstar = value_iteration(m, Vec::Constant(m.pairs(), m.k_min()));
  json body = census_json(rr);
  body["classical_q"] = to_std(qstar);
  const Equilibrium* hi = greatest_of(rr.census);
  const Equilibrium* lo = least_of(rr.census);
  if (hi && lo) {
    const double dhi = sup_dist(qstar, hi->q.values);
    const double dlo = sup_dist(qstar, lo->q.values);
    body["distance_to_maximal"] = dhi;
    body["distance_to_minimal"] = dlo;
    body["closer_to"] = dhi <= dlo ? "maximal" : "minimal";
    result.summary["closer_to"] = body["closer_to"];
  } else {
    body["closer_to"] = nullptr;
  }
  out.json_file("compare", body);
}

}  // namespace

ScenarioResult run_scenario(const ExperimentConfig& cfg, const fs::path& out_dir) {
  ScenarioResult result;
  result.summary = json::object();
  Emitter out(cfg, out_dir, result);
  out.json_file("config", cfg.echo);
  switch (cfg.scenario) {
    case Scenario::converge: run_converge(cfg, out, result); break;
    case Scenario::census: run_census(cfg, out, result, false); break;
    case Scenario::regions: run_census(cfg, out, result, true); break;
    case Scenario::fig2: run_fig2(cfg, out, result); break;
    case Scenario::fig3: run_fig3(cfg, out, result); break;
    case Scenario::fig5: run_fig5(cfg, out, result); break;
    case Scenario::multi_eq_51: run_multi_eq(cfg, out, result); break;
    case Scenario::compare_alt: run_compare_alt(cfg, out, result); break;
    case Scenario::compare_classical: run_compare_classical(cfg, out, result); break;
  }
  return result;
}

}  // namespace prospectq
