#include "ovl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ovl/errors.hpp"

namespace ovl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& allowed) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) fail(path + "." + item.key(), "unknown key");
}

const json& require(const json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required key");
  return *it;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double get_finite(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

uint64_t get_uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
  return j.get<uint64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

Vec3 get_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  return {get_finite(j[0], path + "[0]"), get_finite(j[1], path + "[1]"),
          get_finite(j[2], path + "[2]")};
}

TimeFunction get_time_fn(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
  if (kind == "constant") {
    reject_unknown(j, path, {"kind", "value"});
    return TimeFunction::constant(get_finite(require(j, path, "value"), path + ".value"));
  }
  if (kind == "ramp") {
    reject_unknown(j, path, {"kind", "c0", "c1"});
    return TimeFunction::ramp(get_finite(require(j, path, "c0"), path + ".c0"),
                              get_finite(require(j, path, "c1"), path + ".c1"));
  }
  if (kind == "sine") {
    reject_unknown(j, path, {"kind", "c0", "amp", "omega", "phase"});
    const double phase =
        j.contains("phase") ? get_finite(j["phase"], path + ".phase") : 0.0;
    return TimeFunction::sine(get_finite(require(j, path, "c0"), path + ".c0"),
                              get_finite(require(j, path, "amp"), path + ".amp"),
                              get_finite(require(j, path, "omega"), path + ".omega"),
                              phase);
  }
  fail(path + ".kind", "expected constant | ramp | sine");
}

CoefficientProfile get_coefficients(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
  if (kind == "constant") {
    reject_unknown(j, path, {"kind", "a", "b"});
    return CoefficientProfile::constant(get_finite(require(j, path, "a"), path + ".a"),
                                        get_finite(require(j, path, "b"), path + ".b"));
  }
  if (kind == "ratio_locked") {
    reject_unknown(j, path, {"kind", "a_fn", "v_eq_sq"});
    return CoefficientProfile::ratio_locked(
        get_time_fn(require(j, path, "a_fn"), path + ".a_fn"),
        get_finite(require(j, path, "v_eq_sq"), path + ".v_eq_sq"));
  }
  if (kind == "general") {
    reject_unknown(j, path, {"kind", "a_fn", "b_fn"});
    return CoefficientProfile::general(
        get_time_fn(require(j, path, "a_fn"), path + ".a_fn"),
        get_time_fn(require(j, path, "b_fn"), path + ".b_fn"));
  }
  fail(path + ".kind", "expected constant | ratio_locked | general");
}

json time_fn_to_json(const TimeFunction& f) {
  switch (f.kind) {
    case TimeFunction::Kind::Constant:
      return {{"kind", "constant"}, {"value", f.c0}};
    case TimeFunction::Kind::Ramp:
      return {{"kind", "ramp"}, {"c0", f.c0}, {"c1", f.c1}};
    case TimeFunction::Kind::Sine:
      return {{"kind", "sine"}, {"c0", f.c0}, {"amp", f.c1},
              {"omega", f.omega}, {"phase", f.phase}};
  }
  return {};
}

json coefficients_to_json(const CoefficientProfile& p) {
  switch (p.kind()) {
    case CoefficientProfile::Kind::Constant:
      return {{"kind", "constant"}, {"a", p.const_a()}, {"b", p.const_b()}};
    case CoefficientProfile::Kind::RatioLocked:
      return {{"kind", "ratio_locked"}, {"a_fn", time_fn_to_json(p.a_fn())},
              {"v_eq_sq", p.v_eq_sq()}};
    case CoefficientProfile::Kind::General:
      return {{"kind", "general"}, {"a_fn", time_fn_to_json(p.a_fn())},
              {"b_fn", time_fn_to_json(p.b_fn())}};
  }
  return {};
}

int line_of_offset(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

double ExperimentConfig::threshold_or(const std::string& name, double fallback) const {
  const auto it = thresholds.find(name);
  return it == thresholds.end() ? fallback : it->second;
}

bool ExperimentConfig::wants_format(const std::string& fmt) const {
  return std::find(output_formats.begin(), output_formats.end(), fmt) !=
         output_formats.end();
}

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: syntax error at line " +
                      std::to_string(line_of_offset(text, e.byte)) + ": " +
                      e.what());
  }
  require_object(root, "$");
  reject_unknown(root, "$",
                 {"model", "scheme", "n_traj", "sample_times", "grid", "regime",
                  "lambdas", "initial_density", "sweep", "experiment", "seeds",
                  "outputs", "thresholds"});

  ExperimentConfig cfg0;
  if (root.contains("experiment")) {
    const std::string e = get_string(root["experiment"], "$.experiment");
    static const std::set<std::string> known = {
        "speed_relaxation", "cf_crosscheck", "v0_symmetry", "diffusion_limit",
        "wave_limit"};
    if (!known.count(e)) fail("$.experiment", "unknown experiment tag");
    cfg0.experiment = e;
  }

  ExperimentConfig cfg = std::move(cfg0);

  // regime (parsed first; it may define the coefficients)
  if (root.contains("regime")) {
    const json& jr = root["regime"];
    require_object(jr, "$.regime");
    reject_unknown(jr, "$.regime", {"kind", "epsilon", "base_a", "base_b"});
    const std::string kind =
        get_string(require(jr, "$.regime", "kind"), "$.regime.kind");
    RegimeParams rp;
    if (kind == "diffusion")
      rp.regime = Regime::Diffusion;
    else if (kind == "wave")
      rp.regime = Regime::Wave;
    else
      fail("$.regime.kind", "expected diffusion | wave");
    rp.epsilon = get_finite(require(jr, "$.regime", "epsilon"), "$.regime.epsilon");
    rp.base_a = get_finite(require(jr, "$.regime", "base_a"), "$.regime.base_a");
    rp.base_b = get_finite(require(jr, "$.regime", "base_b"), "$.regime.base_b");
    try {
      rp.validate();
    } catch (const ConfigError& e) {
      fail("$.regime", e.what());
    }
    cfg.regime = rp;
  }

  // model
  {
    const json& jm = require(root, "$", "model");
    require_object(jm, "$.model");
    reject_unknown(jm, "$.model", {"coefficients", "H", "v0", "x0"});
    if (jm.contains("coefficients")) {
      if (cfg.regime)
        fail("$.model.coefficients",
             "conflicts with $.regime, which defines the coefficients");
      cfg.model.coeffs = get_coefficients(jm["coefficients"], "$.model.coefficients");
    } else if (cfg.regime) {
      cfg.model.coeffs = cfg.regime->scaled_profile();
    } else {
      fail("$.model.coefficients", "missing required key");
    }
    cfg.model.H = jm.contains("H") ? get_vec3(jm["H"], "$.model.H") : Vec3{};
    cfg.model.v0 = get_vec3(require(jm, "$.model", "v0"), "$.model.v0");
    cfg.model.x0 = jm.contains("x0") ? get_vec3(jm["x0"], "$.model.x0") : Vec3{};
  }

  // scheme
  {
    const json& js = require(root, "$", "scheme");
    require_object(js, "$.scheme");
    reject_unknown(js, "$.scheme", {"kind", "dt"});
    const std::string kind =
        get_string(require(js, "$.scheme", "kind"), "$.scheme.kind");
    if (kind == "euler_maruyama")
      cfg.scheme.kind = SchemeKind::EulerMaruyama;
    else if (kind == "speed_projected")
      cfg.scheme.kind = SchemeKind::SpeedProjected;
    else
      fail("$.scheme.kind", "expected euler_maruyama | speed_projected");
    cfg.scheme.dt = get_finite(require(js, "$.scheme", "dt"), "$.scheme.dt");
  }

  cfg.n_traj = get_uint(require(root, "$", "n_traj"), "$.n_traj");
  if (cfg.n_traj == 0) fail("$.n_traj", "must be >= 1");

  {
    const json& jt = require(root, "$", "sample_times");
    if (!jt.is_array() || jt.empty()) fail("$.sample_times", "expected a non-empty array");
    for (size_t i = 0; i < jt.size(); ++i)
      cfg.sample_times.push_back(
          get_finite(jt[i], "$.sample_times[" + std::to_string(i) + "]"));
    if (cfg.sample_times.front() != 0.0) fail("$.sample_times", "must start at 0");
    for (size_t i = 1; i < cfg.sample_times.size(); ++i)
      if (!(cfg.sample_times[i] > cfg.sample_times[i - 1]))
        fail("$.sample_times", "must be strictly increasing");
  }

  if (root.contains("grid")) {
    const json& jg = root["grid"];
    require_object(jg, "$.grid");
    reject_unknown(jg, "$.grid", {"n_per_axis", "lambda_max", "x_extent"});
    SpectralGrid g;
    const uint64_t npa = get_uint(require(jg, "$.grid", "n_per_axis"), "$.grid.n_per_axis");
    if (npa > 1024) fail("$.grid.n_per_axis", "too large (max 1024)");
    g.n_per_axis = static_cast<int>(npa);
    g.lambda_max = get_finite(require(jg, "$.grid", "lambda_max"), "$.grid.lambda_max");
    g.x_extent = get_finite(require(jg, "$.grid", "x_extent"), "$.grid.x_extent");
    try {
      g.validate();
    } catch (const ConfigError& e) {
      fail("$.grid", e.what());
    }
    cfg.grid = g;
  }

  if (root.contains("lambdas")) {
    const json& jl = root["lambdas"];
    if (!jl.is_array()) fail("$.lambdas", "expected an array of 3-vectors");
    for (size_t i = 0; i < jl.size(); ++i)
      cfg.lambdas.push_back(get_vec3(jl[i], "$.lambdas[" + std::to_string(i) + "]"));
  }

  if (root.contains("initial_density")) {
    const json& jd = root["initial_density"];
    require_object(jd, "$.initial_density");
    reject_unknown(jd, "$.initial_density", {"kind", "sigma", "center"});
    const std::string kind =
        get_string(require(jd, "$.initial_density", "kind"), "$.initial_density.kind");
    if (kind != "gaussian") fail("$.initial_density.kind", "expected gaussian");
    ExperimentConfig::InitialDensity d;
    d.sigma = get_finite(require(jd, "$.initial_density", "sigma"),
                         "$.initial_density.sigma");
    if (d.sigma <= 0.0) fail("$.initial_density.sigma", "must be positive");
    d.center = jd.contains("center")
                   ? get_vec3(jd["center"], "$.initial_density.center")
                   : Vec3{};
    cfg.initial_density = d;
  }

  if (root.contains("sweep")) {
    const json& js = root["sweep"];
    require_object(js, "$.sweep");
    reject_unknown(js, "$.sweep", {"epsilons"});
    const json& je = require(js, "$.sweep", "epsilons");
    if (!je.is_array() || je.size() < 2)
      fail("$.sweep.epsilons", "expected an array of at least 2 values");
    for (size_t i = 0; i < je.size(); ++i) {
      const double e = get_finite(je[i], "$.sweep.epsilons[" + std::to_string(i) + "]");
      if (e <= 0.0) fail("$.sweep.epsilons[" + std::to_string(i) + "]", "must be positive");
      if (i > 0 && !(e < cfg.sweep_epsilons.back()))
        fail("$.sweep.epsilons", "must be strictly decreasing");
      cfg.sweep_epsilons.push_back(e);
    }
    if (!cfg.regime) fail("$.sweep", "requires $.regime");
  }

  {
    const json& js = require(root, "$", "seeds");
    require_object(js, "$.seeds");
    reject_unknown(js, "$.seeds", {"master"});
    cfg.master_seed = get_uint(require(js, "$.seeds", "master"), "$.seeds.master");
  }

  if (root.contains("outputs")) {
    const json& jo = root["outputs"];
    require_object(jo, "$.outputs");
    reject_unknown(jo, "$.outputs", {"formats"});
    const json& jf = require(jo, "$.outputs", "formats");
    if (!jf.is_array()) fail("$.outputs.formats", "expected an array");
    for (size_t i = 0; i < jf.size(); ++i) {
      const std::string f =
          get_string(jf[i], "$.outputs.formats[" + std::to_string(i) + "]");
      if (f != "csv" && f != "binary")
        fail("$.outputs.formats[" + std::to_string(i) + "]", "expected csv | binary");
      if (!cfg.wants_format(f)) cfg.output_formats.push_back(f);
    }
  }
  if (cfg.output_formats.empty()) cfg.output_formats = {"csv"};

  if (root.contains("thresholds")) {
    const json& jt = root["thresholds"];
    require_object(jt, "$.thresholds");
    for (const auto& item : jt.items())
      cfg.thresholds[item.key()] =
          get_finite(item.value(), "$.thresholds." + item.key());
  }

  // Physics re-checks over the full sampled horizon.
  const double t_max = cfg.sample_times.back();
  try {
    cfg.model.validate(t_max);
    cfg.scheme.validate(cfg.model.coeffs, t_max);
  } catch (const ConfigError& e) {
    fail("$", e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config_dump(const ExperimentConfig& cfg) {
  json root;
  root["model"] = {{"coefficients", coefficients_to_json(cfg.model.coeffs)},
                   {"H", {cfg.model.H.x1, cfg.model.H.x2, cfg.model.H.x3}},
                   {"v0", {cfg.model.v0.x1, cfg.model.v0.x2, cfg.model.v0.x3}},
                   {"x0", {cfg.model.x0.x1, cfg.model.x0.x2, cfg.model.x0.x3}}};
  root["scheme"] = {
      {"kind", cfg.scheme.kind == SchemeKind::EulerMaruyama ? "euler_maruyama"
                                                            : "speed_projected"},
      {"dt", cfg.scheme.dt}};
  root["n_traj"] = cfg.n_traj;
  root["sample_times"] = cfg.sample_times;
  if (cfg.grid)
    root["grid"] = {{"n_per_axis", cfg.grid->n_per_axis},
                    {"lambda_max", cfg.grid->lambda_max},
                    {"x_extent", cfg.grid->x_extent}};
  if (cfg.regime)
    root["regime"] = {
        {"kind", cfg.regime->regime == Regime::Diffusion ? "diffusion" : "wave"},
        {"epsilon", cfg.regime->epsilon},
        {"base_a", cfg.regime->base_a},
        {"base_b", cfg.regime->base_b}};
  if (!cfg.lambdas.empty()) {
    json jl = json::array();
    for (const Vec3& l : cfg.lambdas) jl.push_back({l.x1, l.x2, l.x3});
    root["lambdas"] = jl;
  }
  if (cfg.initial_density)
    root["initial_density"] = {{"kind", "gaussian"},
                               {"sigma", cfg.initial_density->sigma},
                               {"center",
                                {cfg.initial_density->center.x1,
                                 cfg.initial_density->center.x2,
                                 cfg.initial_density->center.x3}}};
  if (!cfg.sweep_epsilons.empty()) root["sweep"] = {{"epsilons", cfg.sweep_epsilons}};
  if (!cfg.experiment.empty()) root["experiment"] = cfg.experiment;
  root["seeds"] = {{"master", cfg.master_seed}};
  root["outputs"] = {{"formats", cfg.output_formats}};
  if (!cfg.thresholds.empty()) root["thresholds"] = cfg.thresholds;
  return root.dump(2) + "\n";
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const uint64_t h = fnv1a64(canonical_config_dump(cfg));
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h >> (4 * i)) & 0xf];
  return out;
}

}
