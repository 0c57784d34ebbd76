#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "cipad/mesh.hpp"

using namespace cipad;

TEST_CASE("two-triangle unit square", "[mesh]") {
  Mesh m = build_unit_square_mesh(1, 1);
  REQUIRE(m.n_elements() == 2);
  REQUIRE(m.n_interior_facets() == 1);
  REQUIRE(m.n_boundary_facets() == 4);
  for (double h : m.h_elem) CHECK(h == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.global_h == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.element_area(0) == Catch::Approx(0.5));
  CHECK(m.element_area(1) == Catch::Approx(0.5));

  // The interior facet is the lower-left -> upper-right diagonal.
  for (const auto& f : m.facets) {
    if (!f.is_interior()) continue;
    Vec2 a = m.vertices[static_cast<std::size_t>(f.v0)];
    Vec2 b = m.vertices[static_cast<std::size_t>(f.v1)];
    CHECK(std::min(a.x, b.x) == Catch::Approx(0.0).margin(1e-15));
    CHECK(std::max(b.y, a.y) == Catch::Approx(1.0));
    CHECK(f.length == Catch::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("fully periodic 2x2 torus", "[mesh]") {
  Mesh m = build_unit_square_mesh(2, 2, true, true);
  REQUIRE(m.n_elements() == 8);
  // 16 facets exist before identification; the 8 boundary ones merge in
  // opposite pairs, leaving 12, all interior (handshake: 8*3 = 2*12).
  CHECK(m.facets.size() == 12);
  CHECK(m.n_interior_facets() == 12);
  CHECK(m.n_boundary_facets() == 0);

  std::set<index_t> reps(m.vertex_rep.begin(), m.vertex_rep.end());
  CHECK(reps.size() == 4);  // 9 vertices collapse to 4
}

TEST_CASE("facet handshake on assorted meshes", "[mesh]") {
  for (auto [nx, ny, px, py] : {std::tuple{3, 3, false, false},
                                std::tuple{4, 2, true, false},
                                std::tuple{2, 5, false, true},
                                std::tuple{4, 4, true, true}}) {
    Mesh m = build_unit_square_mesh(nx, ny, px, py);
    index_t slots = 3 * m.n_elements();
    CHECK(slots == 2 * m.n_interior_facets() + m.n_boundary_facets());
    // Every element edge resolves to a facet that lists it as a side.
    for (index_t t = 0; t < m.n_elements(); ++t)
      for (int e = 0; e < 3; ++e) {
        index_t fid = m.elem_facets[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
        REQUIRE(fid >= 0);
        const Facet& f = m.facets[static_cast<std::size_t>(fid)];
        bool listed = (f.left == t && f.left_edge == e) ||
                      (f.right == t && f.right_edge == e);
        CHECK(listed);
      }
  }
}

TEST_CASE("global mesh size of 3x3 unit square", "[mesh]") {
  Mesh m = build_unit_square_mesh(3, 3);
  CHECK(m.global_h == Catch::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-14));
}

TEST_CASE("facet normals are unit and point out of the left element", "[mesh]") {
  Mesh m = build_unit_square_mesh(3, 4);
  for (const auto& f : m.facets) {
    CHECK(norm(f.normal) == Catch::Approx(1.0).epsilon(1e-14));
    auto c = m.triangle_coords(f.left);
    Vec2 centroid = (c[0] + c[1] + c[2]) * (1.0 / 3.0);
    Vec2 a = m.vertices[static_cast<std::size_t>(f.v0)];
    Vec2 b = m.vertices[static_cast<std::size_t>(f.v1)];
    Vec2 mid = (a + b) * 0.5;
    CHECK(dot(f.normal, mid - centroid) > 0.0);
  }
}

TEST_CASE("seam facets carry the period shift", "[mesh]") {
  Mesh m = build_unit_square_mesh(4, 3, true, false);
  int seam = 0;
  for (const auto& f : m.facets) {
    if (!f.is_interior()) continue;
    if (std::abs(f.right_shift.x) > 0 || std::abs(f.right_shift.y) > 0) {
      ++seam;
      CHECK(std::abs(f.right_shift.x) == Catch::Approx(1.0));
      CHECK(f.right_shift.y == Catch::Approx(0.0).margin(1e-15));
    }
    // Rep sets of both sides' edges agree.
    auto rep = [&](index_t v) { return m.vertex_rep[static_cast<std::size_t>(v)]; };
    const auto& tri = m.triangles[static_cast<std::size_t>(f.right)];
    index_t a = tri[static_cast<std::size_t>((f.right_edge + 1) % 3)];
    index_t b = tri[static_cast<std::size_t>((f.right_edge + 2) % 3)];
    std::set<index_t> lhs{rep(f.v0), rep(f.v1)}, rhs{rep(a), rep(b)};
    CHECK(lhs == rhs);
  }
  CHECK(seam == 3);  // one merged vertical facet per row
}

TEST_CASE("seam facets only merge on the periodic axis", "[mesh]") {
  Mesh m = build_unit_square_mesh(4, 3, true, false);
  index_t boundary = m.n_boundary_facets();
  CHECK(boundary == 8);  // top and bottom only
  for (const auto& f : m.facets)
    if (!f.is_interior())
      CHECK((f.tag == BoundaryTag::bottom || f.tag == BoundaryTag::top));
}

TEST_CASE("builder rejects bad arguments", "[mesh]") {
  CHECK_THROWS_AS(build_unit_square_mesh(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(build_structured_mesh(3, 3, 1.0, 0.0, 0.0, 1.0, false, false),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_unit_square_mesh(1, 3, true, false), std::invalid_argument);
  CHECK_THROWS_AS(build_unit_square_mesh(3, 1, false, true), std::invalid_argument);
}

namespace {
// Independent peel oracle: quadratic scan over element pairs for shared
// representative vertices.
RegionMask peel_bruteforce(const Mesh& m, const RegionMask& region) {
  auto rep = [&](index_t v) { return m.vertex_rep[static_cast<std::size_t>(v)]; };
  RegionMask out;
  out.in.assign(region.in.size(), 0);
  for (index_t t = 0; t < m.n_elements(); ++t) {
    if (!region.contains(t)) continue;
    bool touches = false;
    for (index_t s = 0; s < m.n_elements() && !touches; ++s) {
      if (region.contains(s)) continue;
      for (index_t va : m.triangles[static_cast<std::size_t>(t)])
        for (index_t vb : m.triangles[static_cast<std::size_t>(s)])
          if (rep(va) == rep(vb)) touches = true;
    }
    out.in[static_cast<std::size_t>(t)] = touches ? 0 : 1;
  }
  return out;
}
}  // namespace

TEST_CASE("peeling one vertex-contact layer", "[mesh]") {
  Mesh m = build_unit_square_mesh(4, 4);
  RegionMask region;
  region.in.assign(static_cast<std::size_t>(m.n_elements()), 0);
  for (index_t t = 0; t < m.n_elements(); ++t) {
    auto c = m.triangle_coords(t);
    bool all_left = c[0].x < 0.75 && c[1].x < 0.75 && c[2].x < 0.75;
    region.in[static_cast<std::size_t>(t)] = all_left ? 1 : 0;
  }
  region.provenance = "elements left of x=0.75";

  RegionMask peeled = peel_boundary_layer(m, region);
  RegionMask expected = peel_bruteforce(m, region);
  REQUIRE(peeled.in == expected.in);
  CHECK(peeled.count() < region.count());
  CHECK(peeled.count() > 0);
}

TEST_CASE("peeling acts across periodic seams", "[mesh]") {
  Mesh m = build_unit_square_mesh(6, 4, true, false);
  RegionMask region;
  region.in.assign(static_cast<std::size_t>(m.n_elements()), 0);
  for (index_t t = 0; t < m.n_elements(); ++t) {
    auto c = m.triangle_coords(t);
    double cx = (c[0].x + c[1].x + c[2].x) / 3.0;
    region.in[static_cast<std::size_t>(t)] = (cx < 0.5) ? 1 : 0;
  }
  region.provenance = "left half";

  RegionMask peeled = peel_boundary_layer(m, region);
  RegionMask expected = peel_bruteforce(m, region);
  REQUIRE(peeled.in == expected.in);
  // Elements hugging x=0 touch the complement through the seam and must go.
  for (index_t t = 0; t < m.n_elements(); ++t) {
    auto c = m.triangle_coords(t);
    bool touches_x0 = std::min({c[0].x, c[1].x, c[2].x}) < 1e-12;
    if (touches_x0) CHECK(!peeled.contains(t));
  }

  RegionMask everything = full_region(m);
  RegionMask all_peeled = peel_boundary_layer(m, everything);
  CHECK(all_peeled.count() == everything.count());  // empty complement
}

TEST_CASE("region masks complement and count", "[mesh]") {
  Mesh m = build_unit_square_mesh(2, 2);
  RegionMask r = full_region(m);
  r.in[0] = 0;
  r.in[3] = 0;
  CHECK(r.count() == m.n_elements() - 2);
  RegionMask c = r.complement();
  CHECK(c.count() == 2);
  CHECK(c.contains(0));
  CHECK(c.contains(3));
  CHECK(!c.contains(1));
}

TEST_CASE("shape regularity metadata", "[mesh]") {
  Mesh m = build_unit_square_mesh(5, 5);
  // Right isoceles triangles: ratio = sqrt(2) / ((2 - sqrt(2))/2).
  double expected = std::sqrt(2.0) / (1.0 - std::sqrt(2.0) / 2.0);
  CHECK(m.shape_ratio == Catch::Approx(expected).epsilon(1e-12));
}
