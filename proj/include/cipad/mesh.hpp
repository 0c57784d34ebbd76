#pragma once

/// @file mesh.hpp
/// Structured triangular meshes of axis-aligned rectangles with optional
/// periodic identification, plus element-set masks used to restrict
/// integrals and error norms to subdomains.
///
/// Every cell is split along its lower-left -> upper-right diagonal, so the
/// element diameter h_T is the diagonal length. Periodicity is realised by
/// mapping boundary vertices to master representatives; facets are keyed on
/// representative pairs, which merges opposite boundary edges into interior
/// facets. Geometry (coordinates) is kept per copy: a facet on the seam
/// stores the translation from its left-element copy to its right-element
/// copy so that both incident elements can be evaluated at matching points.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cipad/types.hpp"

namespace cipad {

enum class BoundaryTag : int { none = 0, left = 1, right = 2, bottom = 3, top = 4 };

struct Facet {
  index_t v0 = -1;  // endpoint vertex ids of the left-element copy,
  index_t v1 = -1;  // ordered by representative id (v0's rep < v1's rep)
  index_t left = -1;
  index_t right = -1;     // -1 on the physical boundary
  int left_edge = -1;     // local edge index within each incident element
  int right_edge = -1;
  Vec2 normal;            // unit, outward from the left element
  double length = 0.0;
  Vec2 right_shift;       // left-copy point + shift = right-copy point
  BoundaryTag tag = BoundaryTag::none;

  bool is_interior() const { return right >= 0; }
};

struct Mesh {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  int nx = 0, ny = 0;
  bool periodic_x = false, periodic_y = false;

  std::vector<Vec2> vertices;
  std::vector<index_t> vertex_rep;  // master representative per vertex
  std::vector<std::array<index_t, 3>> triangles;  // CCW, original vertex ids
  std::vector<Facet> facets;
  // facet id for each element's local edge e (edge e joins local vertices
  // (e+1)%3 and (e+2)%3, i.e. the edge opposite local vertex e)
  std::vector<std::array<index_t, 3>> elem_facets;
  std::vector<double> h_elem;  // longest edge per element
  double global_h = 0.0;
  double shape_ratio = 0.0;  // max over elements of h_T / inradius

  index_t n_elements() const { return static_cast<index_t>(triangles.size()); }
  index_t n_vertices() const { return static_cast<index_t>(vertices.size()); }

  std::array<Vec2, 3> triangle_coords(index_t t) const {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    return {vertices[static_cast<std::size_t>(tri[0])],
            vertices[static_cast<std::size_t>(tri[1])],
            vertices[static_cast<std::size_t>(tri[2])]};
  }

  double element_area(index_t t) const {
    auto c = triangle_coords(t);
    return 0.5 * std::abs((c[1].x - c[0].x) * (c[2].y - c[0].y) -
                          (c[2].x - c[0].x) * (c[1].y - c[0].y));
  }

  index_t n_interior_facets() const {
    index_t n = 0;
    for (const auto& f : facets) n += f.is_interior() ? 1 : 0;
    return n;
  }
  index_t n_boundary_facets() const {
    return static_cast<index_t>(facets.size()) - n_interior_facets();
  }
};

/// Element set with a human-readable note about how it was produced.
struct RegionMask {
  std::vector<std::uint8_t> in;
  std::string provenance;

  index_t count() const {
    index_t n = 0;
    for (auto b : in) n += b ? 1 : 0;
    return n;
  }
  bool contains(index_t e) const { return in[static_cast<std::size_t>(e)] != 0; }

  RegionMask complement() const {
    RegionMask c;
    c.in.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) c.in[i] = in[i] ? 0 : 1;
    c.provenance = "complement of: " + provenance;
    return c;
  }
};

inline RegionMask full_region(const Mesh& mesh) {
  RegionMask r;
  r.in.assign(static_cast<std::size_t>(mesh.n_elements()), 1);
  r.provenance = "all elements";
  return r;
}

inline Mesh build_structured_mesh(int nx, int ny, double x0, double x1, double y0,
                                  double y1, bool periodic_x, bool periodic_y) {
  require(nx >= 1 && ny >= 1, "build_structured_mesh: need at least one cell per axis");
  require(x1 > x0 && y1 > y0, "build_structured_mesh: empty rectangle");
  require(!periodic_x || nx >= 2,
          "build_structured_mesh: periodic x-axis needs at least two cells");
  require(!periodic_y || ny >= 2,
          "build_structured_mesh: periodic y-axis needs at least two cells");

  Mesh m;
  m.x0 = x0;
  m.x1 = x1;
  m.y0 = y0;
  m.y1 = y1;
  m.nx = nx;
  m.ny = ny;
  m.periodic_x = periodic_x;
  m.periodic_y = periodic_y;

  const double dx = (x1 - x0) / nx;
  const double dy = (y1 - y0) / ny;

  auto vid = [&](int i, int j) { return static_cast<index_t>(j) * (nx + 1) + i; };

  m.vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({x0 + i * dx, y0 + j * dy});

  m.vertex_rep.resize(m.vertices.size());
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      int mi = (periodic_x && i == nx) ? 0 : i;
      int mj = (periodic_y && j == ny) ? 0 : j;
      m.vertex_rep[static_cast<std::size_t>(vid(i, j))] = vid(mi, mj);
    }

  // Two CCW triangles per cell, split along the lower-left -> upper-right
  // diagonal: (v00, v10, v11) and (v00, v11, v01).
  m.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      index_t v00 = vid(i, j), v10 = vid(i + 1, j);
      index_t v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }

  const double diag = std::sqrt(dx * dx + dy * dy);
  m.h_elem.assign(m.triangles.size(), diag);
  m.global_h = diag;
  const double inradius = 0.5 * (dx + dy - diag);
  m.shape_ratio = diag / inradius;

  // Facet table keyed on the period-wrapped edge midpoint in integer lattice
  // coordinates (vertices sit on an (nx+1) x (ny+1) lattice, midpoints on the
  // doubled lattice). Wrapping identifies the two copies of a seam edge while
  // keeping geometrically distinct edges distinct; representative *pairs*
  // cannot do that on coarse tori, where e.g. the two diagonals of a 2x2
  // periodic mesh share one rep pair. The first element to visit an edge
  // becomes the facet's left element and donates the geometry.
  auto lattice = [&](index_t v) {
    return std::pair<int, int>{static_cast<int>(v % (nx + 1)),
                               static_cast<int>(v / (nx + 1))};
  };
  auto edge_key = [&](index_t a, index_t b) {
    auto [ia, ja] = lattice(a);
    auto [ib, jb] = lattice(b);
    int mx = ia + ib, my = ja + jb;  // doubled midpoint coordinates
    if (periodic_x) mx %= 2 * nx;
    if (periodic_y) my %= 2 * ny;
    return std::pair<int, int>{mx, my};
  };
  std::map<std::pair<int, int>, index_t> facet_of;
  m.elem_facets.assign(m.triangles.size(), {-1, -1, -1});
  for (index_t t = 0; t < m.n_elements(); ++t) {
    const auto& tri = m.triangles[static_cast<std::size_t>(t)];
    for (int e = 0; e < 3; ++e) {
      index_t a = tri[(e + 1) % 3];
      index_t b = tri[(e + 2) % 3];
      index_t ra = m.vertex_rep[static_cast<std::size_t>(a)];
      index_t rb = m.vertex_rep[static_cast<std::size_t>(b)];
      require(ra != rb, "build_structured_mesh: edge endpoints identified");
      auto key = edge_key(a, b);
      auto it = facet_of.find(key);
      if (it == facet_of.end()) {
        Facet f;
        // Order endpoints by representative so both sides agree on direction.
        f.v0 = (ra <= rb) ? a : b;
        f.v1 = (ra <= rb) ? b : a;
        f.left = t;
        f.left_edge = e;
        Vec2 pa = m.vertices[static_cast<std::size_t>(a)];
        Vec2 pb = m.vertices[static_cast<std::size_t>(b)];
        Vec2 tangent = pb - pa;  // CCW order within the left element
        f.length = norm(tangent);
        // CCW boundary tangent -> outward normal is the clockwise rotation.
        f.normal = {tangent.y / f.length, -tangent.x / f.length};
        f.right_shift = {0.0, 0.0};
        index_t id = static_cast<index_t>(m.facets.size());
        m.facets.push_back(f);
        facet_of.emplace(key, id);
        m.elem_facets[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)] = id;
      } else {
        Facet& f = m.facets[static_cast<std::size_t>(it->second)];
        require(f.right == -1, "build_structured_mesh: three elements on one facet");
        f.right = t;
        f.right_edge = e;
        // Translation from the left-element copy to this element's copy,
        // matched endpoint-by-endpoint via representatives.
        index_t match = (m.vertex_rep[static_cast<std::size_t>(a)] ==
                         m.vertex_rep[static_cast<std::size_t>(f.v0)])
                            ? a
                            : b;
        f.right_shift = m.vertices[static_cast<std::size_t>(match)] -
                        m.vertices[static_cast<std::size_t>(f.v0)];
        m.elem_facets[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)] =
            it->second;
      }
    }
  }

  const double tol = 1e-12 * std::max(x1 - x0, y1 - y0);
  for (auto& f : m.facets) {
    if (f.is_interior()) continue;
    Vec2 pa = m.vertices[static_cast<std::size_t>(f.v0)];
    Vec2 pb = m.vertices[static_cast<std::size_t>(f.v1)];
    if (std::abs(pa.x - x0) < tol && std::abs(pb.x - x0) < tol)
      f.tag = BoundaryTag::left;
    else if (std::abs(pa.x - x1) < tol && std::abs(pb.x - x1) < tol)
      f.tag = BoundaryTag::right;
    else if (std::abs(pa.y - y0) < tol && std::abs(pb.y - y0) < tol)
      f.tag = BoundaryTag::bottom;
    else if (std::abs(pa.y - y1) < tol && std::abs(pb.y - y1) < tol)
      f.tag = BoundaryTag::top;
    else
      fail("build_structured_mesh: boundary facet off the rectangle boundary");
  }
  return m;
}

/// Unit square convenience builder.
inline Mesh build_unit_square_mesh(int nx, int ny, bool periodic_x = false,
                                   bool periodic_y = false) {
  return build_structured_mesh(nx, ny, 0.0, 1.0, 0.0, 1.0, periodic_x, periodic_y);
}

/// Remove from `region` every element whose closure touches the closure of
/// the complement, vertex contact included. Periodic identification counts:
/// contact across a seam is real contact.
inline RegionMask peel_boundary_layer(const Mesh& mesh, const RegionMask& region) {
  require(region.in.size() == static_cast<std::size_t>(mesh.n_elements()),
          "peel_boundary_layer: mask size mismatch");
  std::vector<std::uint8_t> touched(mesh.vertices.size(), 0);
  for (index_t t = 0; t < mesh.n_elements(); ++t) {
    if (region.contains(t)) continue;
    for (index_t v : mesh.triangles[static_cast<std::size_t>(t)])
      touched[static_cast<std::size_t>(mesh.vertex_rep[static_cast<std::size_t>(v)])] = 1;
  }
  RegionMask peeled;
  peeled.in.assign(region.in.size(), 0);
  for (index_t t = 0; t < mesh.n_elements(); ++t) {
    if (!region.contains(t)) continue;
    bool interior = true;
    for (index_t v : mesh.triangles[static_cast<std::size_t>(t)])
      if (touched[static_cast<std::size_t>(
              mesh.vertex_rep[static_cast<std::size_t>(v)])])
        interior = false;
    peeled.in[static_cast<std::size_t>(t)] = interior ? 1 : 0;
  }
  peeled.provenance = "one vertex-contact layer peeled from: " + region.provenance;
  return peeled;
}

}  // namespace cipad
