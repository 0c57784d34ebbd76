#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cipad/mesh.hpp"
#include "cipad/space.hpp"
#include "cipad/stabilization.hpp"

using namespace cipad;

namespace {

// Hat function on the two-triangle unit square: 1 at vertex (1,0), 0 elsewhere.
// On the lower triangle it equals x - y; on the upper triangle it vanishes.
Field unit_square_hat(const std::shared_ptr<const Space>& sp) {
  Field u = sp->make_field();
  u.coeffs[sp->vertex_dof(1)] = 1.0;  // vertex (1,0) has index 1
  return u;
}

Field zero_field(const std::shared_ptr<const Space>& sp) { return sp->make_field(); }

Field random_field(const std::shared_ptr<const Space>& sp, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Field f = sp->make_field();
  for (index_t d = 0; d < sp->n_dofs(); ++d) f.coeffs[d] = dist(gen);
  return f;
}

std::vector<double> random_switch(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> varpi(n);
  for (auto& v : varpi) v = dist(gen);
  return varpi;
}

}  // namespace

TEST_CASE("jump form on a hat function matches the hand-computed value",
          "[stabilization]") {
  // Hat gradient jumps only across the diagonal: grad = (1,-1) vs (0,0),
  // normal (1,-1)/sqrt(2), so the jump is sqrt(2) along a facet of length
  // sqrt(2). Each element contributes h^2 * 2*sqrt(2) = 4*sqrt(2) with
  // h = sqrt(2), and the facet is visited from both sides: 8*sqrt(2).
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 1);
  Field u = unit_square_hat(sp);
  std::vector<double> varpi(2, 0.0);
  double s0 = s0_apply(varpi, u, u, Vec2{1.0, 0.0});
  REQUIRE(s0 == Catch::Approx(8.0 * std::sqrt(2.0)).margin(1e-12));

  // Half-open switch scales the same value linearly.
  std::vector<double> varpi_q(2, 0.25);
  REQUIRE(s0_apply(varpi_q, u, u, Vec2{1.0, 0.0}) ==
          Catch::Approx(0.75 * 8.0 * std::sqrt(2.0)).margin(1e-12));

  // Fully open switch removes the jump penalty entirely.
  std::vector<double> varpi_one(2, 1.0);
  REQUIRE(s0_apply(varpi_one, u, u, Vec2{1.0, 0.0}) == 0.0);
}

TEST_CASE("diffusion form on a hat function matches the hand-computed value",
          "[stabilization]") {
  // |grad u|^2 = 2 on the lower triangle (area 1/2), zero on the upper,
  // so the integral is 1; scaled by h = sqrt(2) and unit |beta|.
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 1);
  Field u = unit_square_hat(sp);
  std::vector<double> varpi(2, 1.0);
  REQUIRE(s1_apply(varpi, u, u, Vec2{0.0, 1.0}) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-12));

  std::vector<double> varpi_zero(2, 0.0);
  REQUIRE(s1_apply(varpi_zero, u, u, Vec2{0.0, 1.0}) == 0.0);
}

TEST_CASE("facet part of the residual indicator picks up the hat jump",
          "[stabilization]") {
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 1);
  Field u = unit_square_hat(sp);
  Field dt = zero_field(sp);

  StabParams p;
  p.rho1 = 1.0;
  p.rho2 = 0.0;
  auto R = residual_indicator(u, dt, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(R.size() == 2);
  // Both elements share the diagonal, whose normal-gradient jump is sqrt(2).
  REQUIRE(R[0] == Catch::Approx(std::sqrt(2.0)).margin(1e-13));
  REQUIRE(R[1] == Catch::Approx(std::sqrt(2.0)).margin(1e-13));
}

TEST_CASE("bulk part of the residual indicator sees advective derivative, rate "
          "term, and forcing",
          "[stabilization]") {
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 1);
  Field u = unit_square_hat(sp);
  Field dt = zero_field(sp);

  StabParams p;
  p.rho1 = 0.0;
  p.rho2 = 1.0;

  // beta.grad u = 1 on the lower triangle, 0 on the upper.
  auto R = residual_indicator(u, dt, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(R[0] == Catch::Approx(1.0).margin(1e-13));
  REQUIRE(R[1] == Catch::Approx(0.0).margin(1e-13));

  // Rate term alone: nodal max of the hat is 1 on the lower element only.
  Field w0 = zero_field(sp);
  auto Rdt = residual_indicator(w0, u, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(Rdt[0] == Catch::Approx(1.0).margin(1e-13));
  REQUIRE(Rdt[1] == Catch::Approx(0.0).margin(1e-13));

  // Matching forcing cancels the rate term exactly.
  auto Rcancel = residual_indicator(w0, u, &u, Vec2{1.0, 0.0}, p);
  REQUIRE(Rcancel[0] == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(Rcancel[1] == Catch::Approx(0.0).margin(1e-14));

  // Both toggles on: contributions add.
  StabParams pboth;
  pboth.rho1 = 1.0;
  pboth.rho2 = 1.0;
  auto Rboth = residual_indicator(u, dt, nullptr, Vec2{1.0, 0.0}, pboth);
  REQUIRE(Rboth[0] == Catch::Approx(std::sqrt(2.0) + 1.0).margin(1e-13));
  REQUIRE(Rboth[1] == Catch::Approx(std::sqrt(2.0)).margin(1e-13));
}

TEST_CASE("facet sup sampling includes endpoints where the max lives",
          "[stabilization]") {
  // Quadratic bubble on the lower triangle's bottom edge: u = 4(1-x)(x-y)
  // there, zero on the upper triangle. Along the diagonal (s,s) the
  // normal-gradient jump is 4*sqrt(2)*(1-s), affine in arc length, so the
  // sup 4*sqrt(2) sits at the endpoint s=0 — interior Gauss points alone
  // would undershoot it.
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 2);
  Field u = sp->make_field();
  bool found = false;
  for (index_t d = 0; d < sp->n_dofs(); ++d) {
    Vec2 c = sp->dof_coord(d);
    if (std::abs(c.x - 0.5) < 1e-12 && std::abs(c.y) < 1e-12) {
      u.coeffs[d] = 1.0;
      found = true;
    }
  }
  REQUIRE(found);

  Field dt = zero_field(sp);
  StabParams p;
  p.rho1 = 1.0;
  p.rho2 = 0.0;
  auto R = residual_indicator(u, dt, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(R[0] == Catch::Approx(4.0 * std::sqrt(2.0)).margin(1e-12));
  REQUIRE(R[1] == Catch::Approx(4.0 * std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("bulk sup sampling includes the Lagrange nodes where the max lives",
          "[stabilization]") {
  // Same bubble: beta.grad u = 4(1-2x+y) on the lower triangle is affine
  // with max magnitude 4 at the vertices (0,0) and (1,0); interior
  // quadrature points undershoot it.
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 2);
  Field u = sp->make_field();
  for (index_t d = 0; d < sp->n_dofs(); ++d) {
    Vec2 c = sp->dof_coord(d);
    if (std::abs(c.x - 0.5) < 1e-12 && std::abs(c.y) < 1e-12) u.coeffs[d] = 1.0;
  }
  Field dt = zero_field(sp);
  StabParams p;
  p.rho1 = 0.0;
  p.rho2 = 1.0;
  auto R = residual_indicator(u, dt, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(R[0] == Catch::Approx(4.0).margin(1e-13));
  REQUIRE(R[1] == Catch::Approx(0.0).margin(1e-13));
}

TEST_CASE("switch formula hits exact spot values and clamps", "[stabilization]") {
  std::vector<double> R = {std::sqrt(2.0), std::sqrt(2.0)};
  std::vector<double> h = {std::sqrt(2.0), std::sqrt(2.0)};

  StabParams p;
  p.U = 4.0;  // h*R/U = 2/4 = 1/2

  p.alpha = 1.0;
  REQUIRE(switch_from_indicator(R, h, p)[0] == Catch::Approx(0.5).margin(1e-15));
  p.alpha = 2.0;
  REQUIRE(switch_from_indicator(R, h, p)[0] == Catch::Approx(0.25).margin(1e-15));
  p.alpha = 4.0;
  REQUIRE(switch_from_indicator(R, h, p)[0] == Catch::Approx(0.0625).margin(1e-15));

  // Doubling the scale halves the base.
  p.U = 8.0;
  p.alpha = 1.0;
  REQUIRE(switch_from_indicator(R, h, p)[0] == Catch::Approx(0.25).margin(1e-15));

  // Saturated residual clamps at one for every exponent.
  p.U = 1.0;
  for (double a : {0.5, 1.0, 4.0, 9.0}) {
    p.alpha = a;
    auto v = switch_from_indicator(R, h, p);
    REQUIRE(v[0] == 1.0);
    REQUIRE(v[1] == 1.0);
  }
}

TEST_CASE("switch values stay in [0,1] and decrease with the exponent",
          "[stabilization]") {
  std::mt19937 gen(77);
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  std::vector<double> R(50), h(50);
  for (int i = 0; i < 50; ++i) {
    R[static_cast<std::size_t>(i)] = dist(gen);
    h[static_cast<std::size_t>(i)] = 0.1 + dist(gen);
  }
  StabParams p;
  p.U = 2.0;
  std::vector<double> prev(50, 1.0);
  for (double a : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    p.alpha = a;
    auto v = switch_from_indicator(R, h, p);
    for (int i = 0; i < 50; ++i) {
      REQUIRE(v[static_cast<std::size_t>(i)] >= 0.0);
      REQUIRE(v[static_cast<std::size_t>(i)] <= 1.0);
      REQUIRE(v[static_cast<std::size_t>(i)] <=
              prev[static_cast<std::size_t>(i)] + 1e-15);
    }
    prev = v;
  }
}

TEST_CASE("switch forcing overrides the indicator", "[stabilization]") {
  std::vector<double> R = {100.0, 0.0};
  std::vector<double> h = {1.0, 1.0};
  StabParams p;
  p.U = 1.0;

  p.force_switch = ForceSwitch::zero;
  auto v0 = switch_from_indicator(R, h, p);
  REQUIRE(v0[0] == 0.0);
  REQUIRE(v0[1] == 0.0);

  p.force_switch = ForceSwitch::one;
  auto v1 = switch_from_indicator(R, h, p);
  REQUIRE(v1[0] == 1.0);
  REQUIRE(v1[1] == 1.0);
}

TEST_CASE("jump form vanishes on globally smooth polynomials", "[stabilization]") {
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(4, 4));
  for (int k : {1, 2, 3}) {
    auto sp = std::make_shared<Space>(mesh, k);
    // Total degree k: reproduced exactly, so the gradient is continuous.
    Field u = sp->interpolate_nodal([k](Vec2 x) {
      double v = 1.0 + 2.0 * x.x - x.y;
      if (k >= 2) v += 0.5 * x.x * x.x - x.x * x.y;
      if (k >= 3) v += 0.25 * x.x * x.x * x.y;
      return v;
    });
    std::vector<double> varpi(static_cast<std::size_t>(mesh->n_elements()), 0.0);
    REQUIRE(std::abs(s0_apply(varpi, u, u, Vec2{2.0, 1.0})) < 1e-12);
  }
}

TEST_CASE("cached operators agree with the quadrature forms", "[stabilization]") {
  struct Case {
    Mesh mesh;
    int degree;
  };
  std::vector<Case> cases;
  cases.push_back({build_unit_square_mesh(4, 4), 1});
  cases.push_back({build_unit_square_mesh(4, 4), 2});
  cases.push_back({build_unit_square_mesh(3, 3), 3});
  cases.push_back(
      {build_structured_mesh(4, 4, 0.0, 1.0, 0.0, 1.0, true, true), 2});

  unsigned seed = 1000;
  for (auto& c : cases) {
    auto mesh = std::make_shared<Mesh>(std::move(c.mesh));
    auto sp = std::make_shared<Space>(mesh, c.degree);
    Vec2 beta{1.5, -0.5};
    StabOperators ops(sp, beta);

    Field u = random_field(sp, seed++);
    Field v = random_field(sp, seed++);
    auto varpi = random_switch(static_cast<std::size_t>(mesh->n_elements()), seed++);

    double s0_ref = s0_apply(varpi, u, v, beta);
    double s1_ref = s1_apply(varpi, u, v, beta);
    double scale0 = std::max(1.0, std::abs(s0_ref));
    double scale1 = std::max(1.0, std::abs(s1_ref));

    REQUIRE(std::abs(ops.bilinear_s0(varpi, u.coeffs, v.coeffs) - s0_ref) <
            1e-11 * scale0);
    REQUIRE(std::abs(ops.bilinear_s1(varpi, u.coeffs, v.coeffs) - s1_ref) <
            1e-11 * scale1);

    auto [S0, S1] = ops.to_sparse(varpi);
    REQUIRE(std::abs(v.coeffs.dot(S0 * u.coeffs) - s0_ref) < 1e-11 * scale0);
    REQUIRE(std::abs(v.coeffs.dot(S1 * u.coeffs) - s1_ref) < 1e-11 * scale1);

    // Symmetry and positive semi-definiteness.
    SparseMatrix d0 = SparseMatrix(S0.transpose()) - S0;
    SparseMatrix d1 = SparseMatrix(S1.transpose()) - S1;
    REQUIRE(d0.coeffs().cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(d1.coeffs().cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(u.coeffs.dot(S0 * u.coeffs) >= -1e-12);
    REQUIRE(u.coeffs.dot(S1 * u.coeffs) >= -1e-12);
  }
}

TEST_CASE("fully open switch zeroes the jump operator and vice versa",
          "[stabilization]") {
  auto mesh =
      std::make_shared<Mesh>(build_structured_mesh(4, 4, 0.0, 1.0, 0.0, 1.0, true, true));
  auto sp = std::make_shared<Space>(mesh, 2);
  StabOperators ops(sp, Vec2{1.0, 0.0});
  Field u = random_field(sp, 42);

  std::vector<double> ones(static_cast<std::size_t>(mesh->n_elements()), 1.0);
  std::vector<double> zeros(static_cast<std::size_t>(mesh->n_elements()), 0.0);

  REQUIRE(ops.apply_s0(ones, u.coeffs).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(ops.apply_s1(zeros, u.coeffs).cwiseAbs().maxCoeff() == 0.0);

  auto [S0, S1] = ops.to_sparse(ones);
  REQUIRE(S0.coeffs().cwiseAbs().sum() == 0.0);
  auto [T0, T1] = ops.to_sparse(zeros);
  REQUIRE(T1.coeffs().cwiseAbs().sum() == 0.0);
}

TEST_CASE("stabilisation parameters are validated", "[stabilization]") {
  StabParams p;
  p.validate();  // defaults are fine

  StabParams bad = p;
  bad.sigma0 = -1.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.U = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.alpha = -2.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.rho1 = 0.5;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.sigma1 = 0.1;
  bad.rho1 = 0.0;
  bad.rho2 = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("switch field couples indicator and switch", "[stabilization]") {
  auto mesh = std::make_shared<Mesh>(build_unit_square_mesh(1, 1));
  auto sp = std::make_shared<Space>(mesh, 1);
  Field u = unit_square_hat(sp);
  Field dt = zero_field(sp);

  StabParams p;
  p.rho1 = 1.0;
  p.rho2 = 0.0;
  p.U = 4.0;
  p.alpha = 1.0;
  auto sf = switch_field(u, dt, nullptr, Vec2{1.0, 0.0}, p);
  REQUIRE(sf.indicator[0] == Catch::Approx(std::sqrt(2.0)).margin(1e-13));
  // h*R/U = sqrt(2)*sqrt(2)/4 = 1/2.
  REQUIRE(sf.varpi[0] == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(sf.varpi[1] == Catch::Approx(0.5).margin(1e-14));
}
