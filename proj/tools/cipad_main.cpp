/// Command-line driver: one subcommand per experiment. Each run creates the
/// configured output directory, drops the fully-resolved config there for
/// provenance, writes the experiment's CSV/VTK outputs, and finishes with a
/// report.json listing each checked criterion. Exit code 0 iff every
/// asserted criterion passed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cipad/config.hpp"
#include "cipad/experiments.hpp"

namespace {

using namespace cipad;

struct Criterion {
  std::string name;
  bool asserted = true;  // false: informational row, never gates the exit code
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value compares to threshold, e.g. ">="
  std::string detail;
};

Criterion check(std::string name, double value, const std::string& relation,
                double threshold, std::string detail = "", bool asserted = true) {
  Criterion c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.relation = relation;
  c.detail = std::move(detail);
  c.asserted = asserted;
  if (relation == ">=") c.passed = value >= threshold;
  else if (relation == "<=") c.passed = value <= threshold;
  else if (relation == ">") c.passed = value > threshold;
  else if (relation == "<") c.passed = value < threshold;
  else throw std::logic_error("unknown relation " + relation);
  return c;
}

void print_criteria(const std::vector<Criterion>& cs) {
  for (const auto& c : cs) {
    std::printf("[%s] %s: value=%.6g %s %.6g%s%s\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.value, c.relation.c_str(), c.threshold,
                c.asserted ? "" : " (informational)",
                c.detail.empty() ? "" : ("  -- " + c.detail).c_str());
  }
}

bool all_asserted_pass(const std::vector<Criterion>& cs) {
  for (const auto& c : cs)
    if (c.asserted && !c.passed) return false;
  return true;
}

void write_report(const std::string& dir, const ExperimentConfig& cfg,
                  const std::vector<Criterion>& cs, double wall_seconds,
                  const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["experiment"] = to_string(cfg.experiment);
  j["all_asserted_pass"] = all_asserted_pass(cs);
  j["criteria"] = nlohmann::ordered_json::array();
  for (const auto& c : cs) {
    nlohmann::ordered_json row;
    row["name"] = c.name;
    row["asserted"] = c.asserted;
    row["passed"] = c.passed;
    row["value"] = c.value;
    row["relation"] = c.relation;
    row["threshold"] = c.threshold;
    if (!c.detail.empty()) row["detail"] = c.detail;
    j["criteria"].push_back(row);
  }
  if (!extra.empty()) j["summary"] = extra;
  j["wall_seconds"] = wall_seconds;
  std::ofstream out(dir + "/report.json", std::ios::binary);
  out << j.dump(2) << "\n";
}

std::string prepare_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/config_resolved.json", std::ios::binary);
  out << to_json(cfg).dump(2) << "\n";
  return cfg.output_dir;
}

double rate_threshold(int degree) { return degree + 0.4; }

// ---------------------------------------------------------------------------

int cmd_solve(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::string dir = prepare_output_dir(cfg);
  SmokeResult r = run_smoke(cfg, &dir);
  diagnostics_csv(r.diagnostics).save(dir + "/diagnostics.csv");

  std::vector<Criterion> cs;
  const auto steps = static_cast<double>(r.diagnostics.back().step);
  double max_linf = 0.0;
  for (const auto& d : r.diagnostics) max_linf = std::max(max_linf, d.linf);
  cs.push_back(check("no_blowup_max_linf", max_linf, "<", 1e10,
                     "largest coefficient magnitude over the run"));
  if (cfg.periodic) {
    cs.push_back(check("mass_drift", r.mass_drift, "<=",
                       1e-10 * std::max(1.0, steps / 100.0),
                       "max |mass(t) - mass(0)|, periodic advection conserves"));
    cs.push_back(check("energy_growth_per_step", r.energy_growth, "<=", 1e-12,
                       "largest relative per-step energy increase"));
  }
  cs.push_back(check("l2_error_at_T", r.err_l2_final, ">=", 0.0,
                     "resolution-dependent, reported only", false));
  print_criteria(cs);

  nlohmann::ordered_json extra;
  extra["mesh_size"] = r.mesh_size;
  extra["h"] = r.h;
  extra["steps"] = r.diagnostics.back().step;
  extra["l2_error_at_T"] = r.err_l2_final;
  write_report(dir, cfg, cs,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
               extra);
  return all_asserted_pass(cs) ? 0 : 1;
}

int cmd_convergence(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::string dir = prepare_output_dir(cfg);
  ConvergenceResult r = run_convergence(cfg, /*include_forced=*/true);
  convergence_csv(r).save(dir + "/rates.csv");

  std::vector<Criterion> cs;
  cs.push_back(check("l2_rate_between_finest_meshes", r.finest_rate_l2(), ">=",
                     rate_threshold(cfg.degree),
                     "plain L2 error at final time, live switch"));
  cs.push_back(check("switch_mode_live",
                     cfg.stab.force_switch == ForceSwitch::none ? 1.0 : 0.0, ">=",
                     1.0, "solver ran with the residual-driven switch"));
  bool monotone = true;
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    if (r.rows[i].err_l2 >= r.rows[i - 1].err_l2) monotone = false;
  cs.push_back(check("error_sequence_monotone", monotone ? 1.0 : 0.0, ">=", 1.0,
                     "flag from the rate-table contract", false));
  if (r.has_forced && r.rows.size() >= 2)
    cs.push_back(check("forced_diffusion_rate", r.rate_forced(r.rows.size() - 1),
                       ">=", 0.0, "full artificial diffusion branch, contrast only",
                       false));
  print_criteria(cs);

  nlohmann::ordered_json extra;
  extra["wall_seconds_solves"] = r.wall_seconds;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    nlohmann::ordered_json row;
    row["n"] = r.rows[i].n;
    row["err_l2_T"] = r.rows[i].err_l2;
    if (i) row["rate_l2_T"] = r.rate_l2(i);
    extra["rows"].push_back(row);
  }
  write_report(dir, cfg, cs,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
               extra);
  return all_asserted_pass(cs) ? 0 : 1;
}

int cmd_shock(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::string dir = prepare_output_dir(cfg);
  ShockResult r = run_shock(cfg, &dir);
  diagnostics_csv(r.combined.diagnostics).save(dir + "/diagnostics.csv");

  std::vector<Criterion> cs;
  cs.push_back(check("no_blowup_max_linf", r.combined.max_linf, "<", 1e10));
  cs.push_back(check("initial_projection_overshoot",
                     r.combined.initial_overshoot(), ">", 5e-3,
                     "discontinuous data must exhibit over/undershoots at t=0"));
  if (r.has_comparison) {
    cs.push_back(check("overshoot_below_plain_jump_penalty",
                       r.plain_jump.overshoot() - r.combined.overshoot(), ">", 0.0,
                       "combined stabilisation vs jump-penalty-only at final time"));
    cs.push_back(check("plain_jump_overshoot", r.plain_jump.overshoot(), ">=", 0.0,
                       "reported for reference", false));
  }
  cs.push_back(check("combined_overshoot", r.combined.overshoot(), ">=", 0.0,
                     "max(u_h) - 1 at final time", false));
  cs.push_back(check("combined_undershoot", r.combined.undershoot(), ">=", 0.0,
                     "-min(u_h) at final time", false));
  cs.push_back(check("upstream_deviation", r.upstream_deviation, ">=", 0.0,
                     "max |u_h - 1| on dofs with x < 0.2 at final time", false));
  print_criteria(cs);

  nlohmann::ordered_json extra;
  extra["combined_overshoot"] = r.combined.overshoot();
  extra["combined_undershoot"] = r.combined.undershoot();
  if (r.has_comparison) {
    extra["plain_jump_overshoot"] = r.plain_jump.overshoot();
    extra["plain_jump_undershoot"] = r.plain_jump.undershoot();
  }
  extra["upstream_deviation"] = r.upstream_deviation;
  write_report(dir, cfg, cs,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
               extra);
  return all_asserted_pass(cs) ? 0 : 1;
}

int cmd_localisation(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::string dir = prepare_output_dir(cfg);
  LocalisationResult r = run_localisation(cfg);
  localisation_csv(r).save(dir + "/rates.csv");

  std::vector<Criterion> cs;
  cs.push_back(check("weighted_rate_between_finest_meshes",
                     r.weighted_main.finest_rate(r.h), ">=",
                     rate_threshold(cfg.degree),
                     "upstream weight, configured switch exponent"));
  cs.push_back(check("global_rate_stalls", r.global_main.finest_rate(r.h), "<=",
                     1.0, "unweighted error is front-limited"));
  cs.push_back(check("control_rate_stalls", r.weighted_control.finest_rate(r.h),
                     "<", 2.0, "weight centred on the front must not localise"));
  cs.push_back(check("alpha1_weighted_rate",
                     r.weighted_low.finest_rate(r.h), ">=",
                     std::min(cfg.degree + 0.5, 1.5),
                     "low-exponent branch of the weighted estimate"));
  double worst_decay = 0.0;
  for (double d : r.decay_ratio) worst_decay = std::max(worst_decay, d);
  cs.push_back(check("weight_decay_budget", worst_decay, "<=", 1.0,
                     "max weight on the rough region relative to h^{k+1}"));
  print_criteria(cs);

  nlohmann::ordered_json extra;
  for (std::size_t i = 0; i < r.sizes.size(); ++i) {
    nlohmann::ordered_json row;
    row["n"] = r.sizes[i];
    row["err_weighted"] = r.weighted_main.err[i];
    row["err_global"] = r.global_main.err[i];
    row["err_weighted_alpha1"] = r.weighted_low.err[i];
    row["err_weighted_control"] = r.weighted_control.err[i];
    if (i) {
      row["rate_weighted"] = r.weighted_main.rate(r.h, i);
      row["rate_global"] = r.global_main.rate(r.h, i);
    }
    extra["rows"].push_back(row);
  }
  write_report(dir, cfg, cs,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
               extra);
  return all_asserted_pass(cs) ? 0 : 1;
}

int cmd_stability_diag(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::string dir = prepare_output_dir(cfg);
  StabilityDiagResult r = run_stability_diag(cfg);
  stability_csv(r).save(dir + "/diagnostics.csv");

  std::vector<Criterion> cs;
  cs.push_back(check("final_margin_nonnegative", r.min_margin, ">=", 0.0,
                     "two-sided bound under the calibrated constant, all trajectories"));
  cs.push_back(check("calibrated_constant", r.c_calibrated, ">", 0.0,
                     "1.25x the largest per-trajectory calibration", false));
  cs.push_back(check("theta_within_proof_regime",
                     r.theta_in_proof_regime ? 1.0 : 0.0, ">=", 0.0,
                     "sqrt(theta) <= sigma1; diagnostic only", false));
  print_criteria(cs);

  nlohmann::ordered_json extra;
  extra["c_calibrated"] = r.c_calibrated;
  extra["c_theta"] = r.c_theta;
  extra["min_final_margin"] = r.min_margin;
  extra["n_trajectories"] = cfg.n_trajectories;
  write_report(dir, cfg, cs,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
               extra);
  return all_asserted_pass(cs) ? 0 : 1;
}

/// Parse the config for a subcommand. The subcommand's kind fills a missing
/// "experiment" key and conflicts are rejected; the shock command also
/// accepts switch_viz configs (same pipeline, comparison run skipped).
ExperimentConfig parse_for(const std::string& path, ExperimentKind kind) {
  if (kind == ExperimentKind::shock) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto root = nlohmann::json::parse(buf.str(), nullptr, false);
    if (root.is_object() && root.contains("experiment") &&
        root["experiment"] == "switch_viz") {
      ExperimentKind viz = ExperimentKind::switch_viz;
      return parse_config_text(buf.str(), path, &viz);
    }
    return parse_config_text(buf.str(), path, &kind);
  }
  return parse_config(path, &kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilised continuous-Galerkin transport solver: combined "
               "gradient-jump penalty and residual-switched artificial "
               "diffusion, with weighted-error and stability diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("config", config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    return sub;
  };

  CLI::App* solve = add("solve", "One smooth periodic transport solve with "
                                 "step diagnostics (experiment: smoke)");
  CLI::App* conv = add("convergence", "Smooth-transport rate study with live "
                                      "switch plus forced-diffusion contrast");
  CLI::App* shock = add("shock", "Transported-step problem: combined vs plain "
                                 "jump-penalty stabilisation, snapshots");
  CLI::App* loc = add("localisation", "Weighted error rates upstream of the "
                                      "front, with negative controls");
  CLI::App* stab = add("stability-diag", "Calibrated two-sided stability "
                                         "inequality along random trajectories");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return cmd_solve(parse_for(config_path, ExperimentKind::smoke));
    if (conv->parsed())
      return cmd_convergence(parse_for(config_path, ExperimentKind::convergence));
    if (shock->parsed())
      return cmd_shock(parse_for(config_path, ExperimentKind::shock));
    if (loc->parsed())
      return cmd_localisation(parse_for(config_path, ExperimentKind::localisation));
    if (stab->parsed())
      return cmd_stability_diag(parse_for(config_path, ExperimentKind::stability_diag));
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
