#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "cipad/config.hpp"

using namespace cipad;

namespace {

std::string reason(const std::function<void()>& call) {
  try {
    call();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config resolves the centralised defaults", "[config]") {
  ExperimentConfig c = parse_config_text("{}");
  REQUIRE(c.experiment == ExperimentKind::smoke);
  REQUIRE(c.output_dir == "out");
  REQUIRE(c.seed == 1234u);
  REQUIRE(c.degree == 2);
  REQUIRE(c.beta.x == 1.0);
  REQUIRE(c.beta.y == 0.0);
  REQUIRE(c.cfl == 0.3);
  REQUIRE(c.theta == 0.1);
  REQUIRE(c.stab.sigma0 == 0.01);
  REQUIRE(c.stab.sigma1 == 0.01);
  REQUIRE(c.stab.alpha == 4.0);
  REQUIRE(c.stab.U == 1.0);
  REQUIRE(c.stab.rho1 == 0.0);
  REQUIRE(c.stab.rho2 == 1.0);
  REQUIRE(c.stab.force_switch == ForceSwitch::none);
  REQUIRE(c.mesh_size == 24);
  REQUIRE(c.final_time == 0.25);
  REQUIRE(c.periodic);
}

TEST_CASE("per-experiment defaults", "[config]") {
  SECTION("convergence") {
    ExperimentConfig c = parse_config_text(R"({"experiment": "convergence"})");
    REQUIRE(c.mesh_sizes == std::vector<int>{8, 16, 32, 64});
    REQUIRE(c.final_time == 0.5);
    REQUIRE(c.periodic);
    REQUIRE(c.stab.U == 1.0);
  }
  SECTION("shock scales the residual threshold with the data") {
    ExperimentConfig c = parse_config_text(R"({"experiment": "shock"})");
    REQUIRE(c.mesh_size == 48);
    REQUIRE(c.final_time == 0.375);
    REQUIRE_FALSE(c.periodic);
    REQUIRE(c.snapshot_times == std::vector<double>{0.05, 0.375});
    // A quarter of |beta| times the unit step amplitude.
    REQUIRE(c.stab.U == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(c.shock_x0 == Catch::Approx(1.0 / 3.0).margin(1e-15));
  }
  SECTION("shock respects an explicit threshold") {
    ExperimentConfig c = parse_config_text(
        R"({"experiment": "shock", "stabilization": {"U": 2.5}})");
    REQUIRE(c.stab.U == 2.5);
  }
  SECTION("localisation channel") {
    ExperimentConfig c = parse_config_text(R"({"experiment": "localisation"})");
    REQUIRE(c.mesh_sizes == std::vector<int>{64, 128, 256});
    REQUIRE(c.domain == std::array<double, 4>{0.0, 4.0, 0.0, 0.25});
    REQUIRE(c.shock_x0 == 3.2);
    REQUIRE(c.weight.x0.x == 0.3);
    REQUIRE(c.weight.x0.y == 0.125);
    REQUIRE(c.weight.r0 == 0.1);
    REQUIRE(c.weight.K == 1.05);
    REQUIRE(c.stab.U == Catch::Approx(0.25).margin(1e-15));
  }
  SECTION("stability diagnostic") {
    ExperimentConfig c = parse_config_text(R"({"experiment": "stability_diag"})");
    REQUIRE(c.mesh_size == 12);
    REQUIRE(c.n_steps == 10);
    REQUIRE(c.n_trajectories == 3);
    REQUIRE(c.theta == 0.1);
  }
}

TEST_CASE("unknown keys are rejected with their line", "[config]") {
  const std::string text = R"({
  "experiment": "convergence",
  "stabilization": {
    "sigma0": 0.01,
    "sigma2": 0.02
  }
})";
  std::string msg =
      reason([&] { (void)parse_config_text(text, "test.json"); });
  REQUIRE(msg.find("sigma2") != std::string::npos);
  REQUIRE(msg.find("test.json:5:") != std::string::npos);

  std::string top = reason(
      [&] { (void)parse_config_text(R"({"colour": "red"})", "test.json"); });
  REQUIRE(top.find("colour") != std::string::npos);
  REQUIRE(top.find("test.json:1:") != std::string::npos);

  std::string wkey = reason([&] {
    (void)parse_config_text(R"({
  "experiment": "localisation",
  "weight": {"x0": [0.3, 0.125], "radius": 0.1}
})",
                            "w.json");
  });
  REQUIRE(wkey.find("radius") != std::string::npos);
  REQUIRE(wkey.find("w.json:3:") != std::string::npos);
}

TEST_CASE("value validation", "[config]") {
  auto bad = [](const std::string& text) {
    return reason([&] { (void)parse_config_text(text); });
  };

  REQUIRE(bad(R"({"stabilization": {"alpha": -1}})").find("exponent") !=
          std::string::npos);
  REQUIRE(bad(R"({"degree": 0})").find("degree") != std::string::npos);
  REQUIRE(bad(R"({"degree": 4})").find("degree") != std::string::npos);
  REQUIRE(bad(R"({"cfl": 0.0})").find("cfl") != std::string::npos);
  REQUIRE(bad(R"({"theta": -0.2})").find("theta") != std::string::npos);
  REQUIRE(bad(R"({"final_time": -1})").find("final_time") != std::string::npos);
  REQUIRE(bad(R"({"beta": [0, 0]})").find("beta") != std::string::npos);
  REQUIRE(bad(R"({"mesh_size": 1})").find("mesh_size") != std::string::npos);
  REQUIRE(bad(R"({"experiment": "warp"})").find("warp") != std::string::npos);
  REQUIRE(bad(R"({"stabilization": {"force_switch": "maybe"}})")
              .find("force_switch") != std::string::npos);
  REQUIRE(bad(R"({"stabilization": {"rho1": 0.5}})").find("0 or 1") !=
          std::string::npos);
  REQUIRE(bad(R"({"seed": -3})").find("seed") != std::string::npos);
  REQUIRE(bad(R"({"experiment": "convergence", "mesh_sizes": [8, 16]})")
              .find("at least 3") != std::string::npos);
  REQUIRE(bad(R"({"experiment": "convergence", "mesh_sizes": [8, 16, 16, 32]})")
              .find("strictly increasing") != std::string::npos);
  REQUIRE(bad(R"({"experiment": "localisation", "weight":
                  {"x0": [0.3, 0.1], "K": 1.0}})")
              .find("K") != std::string::npos);
  REQUIRE(bad(R"({"domain": [1, 0, 0, 1]})").find("domain") != std::string::npos);
  REQUIRE(bad(R"({"snapshot_times": [9.0]})").find("snapshot_times") !=
          std::string::npos);

  // Type errors name the key.
  REQUIRE(bad(R"({"cfl": "fast"})").find("cfl") != std::string::npos);
  REQUIRE(bad(R"({"beta": [1.0]})").find("beta") != std::string::npos);
  REQUIRE(bad(R"({"domain": [0, 1, 0]})").find("domain") != std::string::npos);
  REQUIRE(bad(R"({"stabilization": 3})").find("stabilization") !=
          std::string::npos);

  // Malformed JSON still reports the source.
  REQUIRE(reason([] { (void)parse_config_text("{", "broken.json"); })
              .find("broken.json") != std::string::npos);
}

TEST_CASE("resolved configs round-trip exactly", "[config]") {
  auto roundtrip = [](const std::string& text) {
    ExperimentConfig c = parse_config_text(text);
    std::string dumped = to_json(c).dump(2);
    ExperimentConfig c2 = parse_config_text(dumped, "resolved");
    REQUIRE(to_json(c2).dump(2) == dumped);
  };
  roundtrip("{}");
  roundtrip(R"({"experiment": "convergence", "degree": 1})");
  roundtrip(R"({"experiment": "shock", "mesh_size": 24,
               "stabilization": {"force_switch": "one"}})");
  roundtrip(R"({"experiment": "localisation"})");
  roundtrip(R"({"experiment": "stability_diag", "theta": 0.05, "seed": 7})");
}

TEST_CASE("config files parse with path-tagged errors", "[config]") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cipad_config_test";
  fs::create_directories(dir);
  fs::path good = dir / "good.json";
  {
    std::ofstream out(good);
    out << R"({"experiment": "smoke", "mesh_size": 8, "final_time": 0.1})";
  }
  ExperimentConfig c = parse_config(good.string());
  REQUIRE(c.mesh_size == 8);
  REQUIRE(c.final_time == 0.1);

  fs::path bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << "{\n  \"vorpal\": 3\n}";
  }
  std::string msg = reason([&] { (void)parse_config(bad.string()); });
  REQUIRE(msg.find(bad.string()) != std::string::npos);
  REQUIRE(msg.find(":2:") != std::string::npos);
  REQUIRE(msg.find("vorpal") != std::string::npos);

  std::string missing =
      reason([&] { (void)parse_config((dir / "absent.json").string()); });
  REQUIRE(missing.find("cannot open") != std::string::npos);
  fs::remove_all(dir);
}
