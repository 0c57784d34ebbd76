#pragma once

/// @file config.hpp
/// Experiment configuration: a strict JSON schema with centralised defaults.
///
/// Parsing is deliberately unforgiving: every key must be known, every value
/// well-typed and in range, and error messages carry the file name and line
/// of the offending key so typos surface immediately instead of silently
/// running a default. Defaults are resolved in one place (`resolve`) and the
/// fully-resolved configuration can be serialised back out, so each run's
/// output directory records exactly what was executed.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cipad/stabilization.hpp"
#include "cipad/types.hpp"
#include "cipad/weights.hpp"

namespace cipad {

/// Configuration or schema violation; the message starts with
/// "<source>:<line>:" whenever a line can be attributed.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExperimentKind {
  smoke,
  convergence,
  shock,
  switch_viz,
  localisation,
  stability_diag,
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::smoke: return "smoke";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::shock: return "shock";
    case ExperimentKind::switch_viz: return "switch_viz";
    case ExperimentKind::localisation: return "localisation";
    case ExperimentKind::stability_diag: return "stability_diag";
  }
  fail("to_string: bad experiment kind");
}

inline const char* to_string(ForceSwitch f) {
  switch (f) {
    case ForceSwitch::none: return "none";
    case ForceSwitch::zero: return "zero";
    case ForceSwitch::one: return "one";
  }
  fail("to_string: bad force_switch");
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::smoke;
  std::string output_dir = "out";
  unsigned seed = 1234;
  int degree = 2;
  Vec2 beta{1.0, 0.0};
  double cfl = 0.3;
  double theta = 0.1;
  StabParams stab;

  // Resolved per experiment when not given explicitly.
  std::vector<int> mesh_sizes;  // rate studies; strictly increasing
  int mesh_size = 0;            // single-mesh runs
  double final_time = -1.0;
  bool periodic = true;
  std::array<double, 4> domain{0.0, 1.0, 0.0, 1.0};  // x0, x1, y0, y1
  int ny = 0;  // rows for mesh_size columns; 0 = keep cells square
  double shock_x0 = 1.0 / 3.0;
  double halo_factor = 2.0;                 // rough-region half-width over h
  WeightSpec weight;                        // localisation weight placement
  std::vector<double> snapshot_times;       // field/switch exports
  int n_steps = 10;                         // stability_diag trajectory length
  int n_trajectories = 3;                   // stability_diag sample count

  // Which optional keys the file actually set (drives default resolution).
  bool has_mesh_sizes = false;
  bool has_mesh_size = false;
  bool has_final_time = false;
  bool has_periodic = false;
  bool has_domain = false;
  bool has_u = false;
  bool has_weight = false;
  bool has_snapshot_times = false;
  bool has_beta = false;

  bool is_rate_study() const {
    return experiment == ExperimentKind::convergence ||
           experiment == ExperimentKind::localisation;
  }
  bool is_shock_like() const {
    return experiment == ExperimentKind::shock ||
           experiment == ExperimentKind::switch_viz ||
           experiment == ExperimentKind::localisation;
  }
};

namespace config_detail {

/// Best-effort line attribution: first occurrence of the quoted key in the
/// raw text. Unknown keys are by definition absent from the schema, so the
/// first occurrence is the offending one (or a duplicate of it).
inline int line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  auto pos = text.find(needle);
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() +
                                             static_cast<std::ptrdiff_t>(pos),
                                         '\n'));
}

[[noreturn]] inline void fail_at(const std::string& source, const std::string& text,
                                 const std::string& key, const std::string& msg) {
  std::ostringstream os;
  os << source << ":";
  if (int line = line_of_key(text, key)) os << line << ":";
  os << " " << msg;
  throw ConfigError(os.str());
}

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& section, const std::string& source,
                       const std::string& text) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      fail_at(source, text, item.key(),
              "unknown key \"" + item.key() + "\" in " + section);
  }
}

template <typename T>
T get_as(const nlohmann::json& obj, const std::string& key, const std::string& source,
         const std::string& text) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail_at(source, text, key, "bad value for \"" + key + "\": " + e.what());
  }
}

inline Vec2 get_vec2(const nlohmann::json& obj, const std::string& key,
                     const std::string& source, const std::string& text) {
  auto arr = get_as<std::vector<double>>(obj, key, source, text);
  if (arr.size() != 2)
    fail_at(source, text, key, "\"" + key + "\" must be an array of two numbers");
  return Vec2{arr[0], arr[1]};
}

}  // namespace config_detail

/// Fill experiment-dependent defaults. Every default lives here.
inline void resolve_defaults(ExperimentConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::smoke:
      if (!c.has_mesh_size) c.mesh_size = 24;
      if (!c.has_final_time) c.final_time = 0.25;
      if (!c.has_periodic) c.periodic = true;
      break;
    case ExperimentKind::convergence:
      if (!c.has_mesh_sizes) c.mesh_sizes = {8, 16, 32, 64};
      if (!c.has_final_time) c.final_time = 0.5;
      if (!c.has_periodic) c.periodic = true;
      break;
    case ExperimentKind::shock:
    case ExperimentKind::switch_viz:
      if (!c.has_mesh_size) c.mesh_size = 48;
      if (!c.has_final_time) c.final_time = 0.375;
      if (!c.has_periodic) c.periodic = false;
      if (!c.has_snapshot_times) c.snapshot_times = {0.05, 0.375};
      break;
    case ExperimentKind::localisation:
      if (!c.has_mesh_sizes) c.mesh_sizes = {64, 128, 256};
      if (!c.has_final_time) c.final_time = 0.5;
      if (!c.has_periodic) c.periodic = false;
      if (!c.has_domain) {
        c.domain = {0.0, 4.0, 0.0, 0.25};
        c.shock_x0 = 3.2;  // leaves the decay budget satisfied on 64 columns
      }
      if (!c.has_weight) {
        c.weight.x0 = Vec2{0.3, 0.125};
        c.weight.r0 = 0.1;
        c.weight.K = 1.05;
        c.weight.blend = 0.0;
      }
      break;
    case ExperimentKind::stability_diag:
      if (!c.has_mesh_size) c.mesh_size = 12;
      if (!c.has_final_time) c.final_time = 0.0;  // derived from n_steps
      if (!c.has_periodic) c.periodic = true;
      break;
  }
  // A step profile has sup-norm 1. The settled discrete front's residual
  // level is close to 0.5 |beta| * sup / h_T, so targeting a quarter of
  // |beta| * sup guarantees saturation on shock-crossing elements with a
  // factor-two margin while the switch stays near zero in smooth regions.
  if (!c.has_u && c.is_shock_like()) c.stab.U = 0.25 * norm(c.beta);
}

/// Range and consistency checks on a resolved configuration.
inline void validate(const ExperimentConfig& c, const std::string& source = "config") {
  auto reject = [&](const std::string& msg) { throw ConfigError(source + ": " + msg); };
  if (c.degree < 1 || c.degree > 3) reject("degree must be 1..3");
  if (!(norm(c.beta) > 0.0)) reject("beta must be nonzero");
  if (!(c.cfl > 0.0)) reject("cfl must be positive");
  if (c.theta < 0.0) reject("theta must be nonnegative");
  if (c.final_time < 0.0) reject("final_time must be nonnegative");
  if (c.halo_factor < 0.0) reject("halo_factor must be nonnegative");
  if (c.n_steps < 1) reject("n_steps must be at least 1");
  if (c.n_trajectories < 1) reject("n_trajectories must be at least 1");
  if (!(c.domain[1] > c.domain[0] && c.domain[3] > c.domain[2]))
    reject("domain must satisfy x0 < x1 and y0 < y1");
  if (c.ny < 0) reject("ny must be nonnegative");
  if (c.is_rate_study()) {
    if (c.mesh_sizes.size() < 3) reject("rate studies need at least 3 mesh sizes");
  }
  for (std::size_t i = 0; i < c.mesh_sizes.size(); ++i) {
    if (c.mesh_sizes[i] < 2) reject("mesh sizes must be at least 2");
    if (i > 0 && c.mesh_sizes[i] <= c.mesh_sizes[i - 1])
      reject("mesh_sizes must be strictly increasing");
  }
  // mesh_size 0 means "unused" and is only acceptable for rate studies,
  // which draw their meshes from mesh_sizes instead.
  if (c.mesh_size != 0 && c.mesh_size < 2) reject("mesh_size must be at least 2");
  if (!c.is_rate_study() && c.mesh_size < 2) reject("mesh_size must be at least 2");
  if (c.has_weight || c.experiment == ExperimentKind::localisation) {
    if (!(c.weight.K > 1.0)) reject("weight.K must exceed 1");
    if (c.weight.r0 < 0.0) reject("weight.r0 must be nonnegative");
    if (c.weight.blend < 0.0) reject("weight.blend must be nonnegative");
  }
  for (double t : c.snapshot_times)
    if (t < 0.0 || t > c.final_time + 1e-12)
      reject("snapshot_times must lie within [0, final_time]");
  try {
    c.stab.validate();
  } catch (const std::invalid_argument& e) {
    reject(e.what());
  }
}

/// Parse a JSON configuration from text. `source` names the text in errors
/// (typically the file path).
/// Parse a JSON config. `forced_experiment`, when given (e.g. from a CLI
/// subcommand), fills a missing "experiment" key and rejects a conflicting
/// one, so a config cannot silently run as the wrong experiment.
inline ExperimentConfig parse_config_text(
    const std::string& text, const std::string& source = "config",
    const ExperimentKind* forced_experiment = nullptr) {
  using nlohmann::json;
  using namespace config_detail;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(source + ": top level must be an object");

  static const std::set<std::string> top_keys = {
      "experiment",   "output_dir",  "seed",         "degree",
      "beta",         "cfl",         "theta",        "stabilization",
      "mesh_sizes",   "mesh_size",   "final_time",   "periodic",
      "domain",       "ny",          "shock_x0",     "halo_factor",
      "weight",       "snapshot_times", "n_steps",   "n_trajectories"};
  check_keys(root, top_keys, "the top-level configuration", source, text);

  ExperimentConfig c;
  if (root.contains("experiment")) {
    auto name = get_as<std::string>(root, "experiment", source, text);
    bool found = false;
    for (auto k : {ExperimentKind::smoke, ExperimentKind::convergence,
                   ExperimentKind::shock, ExperimentKind::switch_viz,
                   ExperimentKind::localisation, ExperimentKind::stability_diag}) {
      if (name == to_string(k)) {
        c.experiment = k;
        found = true;
      }
    }
    if (!found)
      fail_at(source, text, "experiment", "unknown experiment \"" + name + "\"");
    if (forced_experiment && c.experiment != *forced_experiment)
      fail_at(source, text, "experiment",
              "config declares experiment \"" + std::string(to_string(c.experiment)) +
                  "\" but the command requested \"" +
                  std::string(to_string(*forced_experiment)) + "\"");
  } else if (forced_experiment) {
    c.experiment = *forced_experiment;
  }
  if (root.contains("output_dir"))
    c.output_dir = get_as<std::string>(root, "output_dir", source, text);
  if (root.contains("seed")) {
    auto s = get_as<long long>(root, "seed", source, text);
    if (s < 0 || s > 0xffffffffLL)
      fail_at(source, text, "seed", "seed must fit in an unsigned 32-bit integer");
    c.seed = static_cast<unsigned>(s);
  }
  if (root.contains("degree")) c.degree = get_as<int>(root, "degree", source, text);
  if (root.contains("beta")) {
    c.beta = get_vec2(root, "beta", source, text);
    c.has_beta = true;
  }
  if (root.contains("cfl")) c.cfl = get_as<double>(root, "cfl", source, text);
  if (root.contains("theta")) c.theta = get_as<double>(root, "theta", source, text);
  if (root.contains("mesh_sizes")) {
    c.mesh_sizes = get_as<std::vector<int>>(root, "mesh_sizes", source, text);
    c.has_mesh_sizes = true;
  }
  if (root.contains("mesh_size")) {
    c.mesh_size = get_as<int>(root, "mesh_size", source, text);
    c.has_mesh_size = true;
  }
  if (root.contains("final_time")) {
    c.final_time = get_as<double>(root, "final_time", source, text);
    c.has_final_time = true;
  }
  if (root.contains("periodic")) {
    c.periodic = get_as<bool>(root, "periodic", source, text);
    c.has_periodic = true;
  }
  if (root.contains("domain")) {
    auto arr = get_as<std::vector<double>>(root, "domain", source, text);
    if (arr.size() != 4)
      fail_at(source, text, "domain", "\"domain\" must be [x0, x1, y0, y1]");
    std::copy(arr.begin(), arr.end(), c.domain.begin());
    c.has_domain = true;
  }
  if (root.contains("ny")) c.ny = get_as<int>(root, "ny", source, text);
  if (root.contains("shock_x0"))
    c.shock_x0 = get_as<double>(root, "shock_x0", source, text);
  if (root.contains("halo_factor"))
    c.halo_factor = get_as<double>(root, "halo_factor", source, text);
  if (root.contains("snapshot_times")) {
    c.snapshot_times = get_as<std::vector<double>>(root, "snapshot_times", source, text);
    c.has_snapshot_times = true;
  }
  if (root.contains("n_steps")) c.n_steps = get_as<int>(root, "n_steps", source, text);
  if (root.contains("n_trajectories"))
    c.n_trajectories = get_as<int>(root, "n_trajectories", source, text);

  if (root.contains("stabilization")) {
    const auto& s = root.at("stabilization");
    if (!s.is_object())
      fail_at(source, text, "stabilization", "\"stabilization\" must be an object");
    static const std::set<std::string> stab_keys = {
        "sigma0", "sigma1", "alpha", "U", "rho1", "rho2", "force_switch"};
    check_keys(s, stab_keys, "\"stabilization\"", source, text);
    if (s.contains("sigma0")) c.stab.sigma0 = get_as<double>(s, "sigma0", source, text);
    if (s.contains("sigma1")) c.stab.sigma1 = get_as<double>(s, "sigma1", source, text);
    if (s.contains("alpha")) c.stab.alpha = get_as<double>(s, "alpha", source, text);
    if (s.contains("U")) {
      c.stab.U = get_as<double>(s, "U", source, text);
      c.has_u = true;
    }
    if (s.contains("rho1")) c.stab.rho1 = get_as<double>(s, "rho1", source, text);
    if (s.contains("rho2")) c.stab.rho2 = get_as<double>(s, "rho2", source, text);
    if (s.contains("force_switch")) {
      auto f = get_as<std::string>(s, "force_switch", source, text);
      if (f == "none")
        c.stab.force_switch = ForceSwitch::none;
      else if (f == "zero")
        c.stab.force_switch = ForceSwitch::zero;
      else if (f == "one")
        c.stab.force_switch = ForceSwitch::one;
      else
        fail_at(source, text, "force_switch",
                "force_switch must be \"none\", \"zero\", or \"one\"");
    }
  }

  if (root.contains("weight")) {
    const auto& w = root.at("weight");
    if (!w.is_object()) fail_at(source, text, "weight", "\"weight\" must be an object");
    static const std::set<std::string> weight_keys = {"x0", "r0", "K", "blend"};
    check_keys(w, weight_keys, "\"weight\"", source, text);
    if (w.contains("x0")) c.weight.x0 = get_vec2(w, "x0", source, text);
    if (w.contains("r0")) c.weight.r0 = get_as<double>(w, "r0", source, text);
    if (w.contains("K")) c.weight.K = get_as<double>(w, "K", source, text);
    if (w.contains("blend")) c.weight.blend = get_as<double>(w, "blend", source, text);
    c.has_weight = true;
  }

  resolve_defaults(c);
  validate(c, source);
  return c;
}

/// Parse a JSON configuration file.
inline ExperimentConfig parse_config(const std::string& path,
                                     const ExperimentKind* forced_experiment = nullptr) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path, forced_experiment);
}

/// Serialise the resolved configuration (all defaults expanded) for
/// provenance; re-parsing the output reproduces the same configuration.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = to_string(c.experiment);
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["degree"] = c.degree;
  j["beta"] = {c.beta.x, c.beta.y};
  j["cfl"] = c.cfl;
  j["theta"] = c.theta;
  j["stabilization"] = {{"sigma0", c.stab.sigma0}, {"sigma1", c.stab.sigma1},
                        {"alpha", c.stab.alpha},   {"U", c.stab.U},
                        {"rho1", c.stab.rho1},     {"rho2", c.stab.rho2},
                        {"force_switch", to_string(c.stab.force_switch)}};
  j["mesh_sizes"] = c.mesh_sizes;
  j["mesh_size"] = c.mesh_size;
  j["final_time"] = c.final_time;
  j["periodic"] = c.periodic;
  j["domain"] = c.domain;
  j["ny"] = c.ny;
  j["shock_x0"] = c.shock_x0;
  j["halo_factor"] = c.halo_factor;
  j["weight"] = {{"x0", {c.weight.x0.x, c.weight.x0.y}},
                 {"r0", c.weight.r0},
                 {"K", c.weight.K},
                 {"blend", c.weight.blend}};
  j["snapshot_times"] = c.snapshot_times;
  j["n_steps"] = c.n_steps;
  j["n_trajectories"] = c.n_trajectories;
  return j;
}

/// Re-parse a serialised configuration, marking every optional as explicit so
/// a round trip is exact.
inline ExperimentConfig config_from_resolved_text(const std::string& text,
                                                  const std::string& source) {
  return parse_config_text(text, source);
}

}  // namespace cipad
