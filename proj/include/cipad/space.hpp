#pragma once

/// @file space.hpp
/// Continuous Lagrange spaces P_k (k = 1..3) on triangular meshes.
///
/// Global numbering: one dof per distinct vertex representative, then k-1
/// dofs per facet (ordered along the facet from the endpoint with the
/// smaller representative id), then interior dofs per element. On periodic
/// meshes this merges seam dofs automatically.
///
/// The space owns the quadrature rules (volume rule exact to degree 2k+2,
/// facet rule exact to 2k+1), per-element affine geometry, and per-facet
/// basis tables (values and physical gradients of both incident elements at
/// the facet quadrature points), which every downstream assembly loop reuses.

#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "cipad/mesh.hpp"
#include "cipad/quadrature.hpp"
#include "cipad/reference.hpp"
#include "cipad/types.hpp"

namespace cipad {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct ElementGeometry {
  Vec2 v0;
  double J[2][2];     // columns are the edge vectors v1-v0, v2-v0
  double Jinv[2][2];
  double detJ = 0.0;  // positive for CCW triangles
};

class Space;

/// Coefficient vector bound to its space. For Lagrange bases the coefficient
/// of a dof equals the function value at the dof node.
struct Field {
  std::shared_ptr<const Space> space;
  Vector coeffs;
};

struct EvalResult {
  double value = 0.0;
  Vec2 gradient;
};

class Space : public std::enable_shared_from_this<Space> {
 public:
  Space(std::shared_ptr<const Mesh> mesh, int degree)
      : mesh_(std::move(mesh)),
        degree_(degree),
        ref_(reference_element(degree)),
        vol_rule_(make_triangle_rule(2 * degree + 2)),
        facet_rule_(make_segment_rule(2 * degree + 1)) {
    require(mesh_ != nullptr, "Space: null mesh");
    build_geometry();
    build_dofs();
    build_volume_tables();
    build_facet_tables();
  }

  static std::shared_ptr<Space> create(std::shared_ptr<const Mesh> mesh, int degree) {
    return std::make_shared<Space>(std::move(mesh), degree);
  }

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  const ReferenceElement& ref() const { return ref_; }
  const TriangleRule& volume_rule() const { return vol_rule_; }
  const SegmentRule& facet_rule() const { return facet_rule_; }

  index_t n_dofs() const { return n_dofs_; }
  int n_local_dofs() const { return ref_.n_nodes(); }
  index_t n_vertex_dofs() const { return n_vertex_dofs_; }

  const index_t* element_dofs(index_t t) const {
    return elem_dofs_.data() + static_cast<std::size_t>(t) * n_local_dofs();
  }
  index_t vertex_dof(index_t vertex) const {
    return vertex_dof_[static_cast<std::size_t>(
        mesh_->vertex_rep[static_cast<std::size_t>(vertex)])];
  }
  Vec2 dof_coord(index_t dof) const { return dof_coords_[static_cast<std::size_t>(dof)]; }

  const ElementGeometry& geometry(index_t t) const {
    return geom_[static_cast<std::size_t>(t)];
  }

  Vec2 map_to_physical(index_t t, const Vec2& xi) const {
    const auto& g = geometry(t);
    return {g.v0.x + g.J[0][0] * xi.x + g.J[0][1] * xi.y,
            g.v0.y + g.J[1][0] * xi.x + g.J[1][1] * xi.y};
  }
  Vec2 map_to_reference(index_t t, const Vec2& x) const {
    const auto& g = geometry(t);
    Vec2 d = x - g.v0;
    return {g.Jinv[0][0] * d.x + g.Jinv[0][1] * d.y,
            g.Jinv[1][0] * d.x + g.Jinv[1][1] * d.y};
  }
  /// Push a reference gradient to physical coordinates: Jinv^T * grad.
  Vec2 physical_gradient(index_t t, const Vec2& ref_grad) const {
    const auto& g = geometry(t);
    return {g.Jinv[0][0] * ref_grad.x + g.Jinv[1][0] * ref_grad.y,
            g.Jinv[0][1] * ref_grad.x + g.Jinv[1][1] * ref_grad.y};
  }

  /// Physical coordinates of the element's Lagrange nodes.
  std::vector<Vec2> element_node_coords(index_t t) const {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(n_local_dofs()));
    for (const auto& xi : ref_.nodes()) out.push_back(map_to_physical(t, xi));
    return out;
  }

  // Reference basis tables at the volume quadrature points.
  int n_volume_qp() const { return static_cast<int>(vol_rule_.points.size()); }
  double volume_basis(int q, int i) const {
    return vol_N_[static_cast<std::size_t>(q) * n_local_dofs() + i];
  }
  const Vec2& volume_basis_ref_grad(int q, int i) const {
    return vol_dN_[static_cast<std::size_t>(q) * n_local_dofs() + i];
  }

  struct FacetTable {
    std::vector<Vec2> x;        // physical quadrature points (left copy)
    std::vector<double> w;      // quadrature weights scaled by facet length
    std::vector<double> N[2];   // [side][q * n_local + i], side 0 = left
    std::vector<Vec2> grad[2];  // physical gradients, same layout
    // Physical gradients at the two facet endpoints (one-sided limits);
    // endpoint sup sampling for jump indicators uses these.
    std::vector<Vec2> grad_end[2];  // [side][p * n_local + i], p in {0,1}
  };
  const FacetTable& facet_table(index_t f) const {
    return facet_tables_[static_cast<std::size_t>(f)];
  }
  int n_facet_qp() const { return static_cast<int>(facet_rule_.points.size()); }

  /// Reference gradient of basis i at Lagrange node p (Lagrange values there
  /// are just the Kronecker delta, so only gradients need a table).
  const Vec2& node_basis_ref_grad(int p, int i) const {
    return node_dN_[static_cast<std::size_t>(p) * n_local_dofs() + i];
  }

  Field make_field() const {
    return Field{shared_from_this(), Vector::Zero(n_dofs_)};
  }

  Field interpolate_nodal(const std::function<double(Vec2)>& g) const {
    Field f = make_field();
    for (index_t d = 0; d < n_dofs_; ++d)
      f.coeffs[d] = g(dof_coords_[static_cast<std::size_t>(d)]);
    return f;
  }

  EvalResult evaluate(const Field& field, index_t t, const Vec2& xi) const {
    std::vector<double> vals;
    std::vector<Vec2> grads;
    ref_.eval(xi, vals, grads);
    const index_t* dofs = element_dofs(t);
    EvalResult r;
    Vec2 ref_grad{};
    for (int i = 0; i < n_local_dofs(); ++i) {
      double c = field.coeffs[dofs[i]];
      r.value += c * vals[static_cast<std::size_t>(i)];
      ref_grad += c * grads[static_cast<std::size_t>(i)];
    }
    r.gradient = physical_gradient(t, ref_grad);
    return r;
  }

  /// Integral of fn(element, physical point) over the mesh (or a region).
  double integrate(const std::function<double(index_t, Vec2)>& fn,
                   const RegionMask* region = nullptr) const {
    double total = 0.0;
    for (index_t t = 0; t < mesh_->n_elements(); ++t) {
      if (region && !region->contains(t)) continue;
      const double detJ = geometry(t).detJ;
      for (const auto& qp : vol_rule_.points)
        total += qp.w * detJ * fn(t, map_to_physical(t, qp.xi));
    }
    return total;
  }

  /// Integral of a discrete field (optionally over a region).
  double integrate_field(const Field& field, const RegionMask* region = nullptr) const {
    double total = 0.0;
    for (index_t t = 0; t < mesh_->n_elements(); ++t) {
      if (region && !region->contains(t)) continue;
      const double detJ = geometry(t).detJ;
      const index_t* dofs = element_dofs(t);
      for (int q = 0; q < n_volume_qp(); ++q) {
        double v = 0.0;
        for (int i = 0; i < n_local_dofs(); ++i)
          v += field.coeffs[dofs[i]] * volume_basis(q, i);
        total += vol_rule_.points[static_cast<std::size_t>(q)].w * detJ * v;
      }
    }
    return total;
  }

  SparseMatrix assemble_mass() const {
    const int nl = n_local_dofs();
    // Reference mass matrix; the affine map scales it by det J per element.
    std::vector<double> mref(static_cast<std::size_t>(nl) * nl, 0.0);
    for (int q = 0; q < n_volume_qp(); ++q) {
      double w = vol_rule_.points[static_cast<std::size_t>(q)].w;
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          mref[static_cast<std::size_t>(i) * nl + j] +=
              w * volume_basis(q, i) * volume_basis(q, j);
    }
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(mesh_->n_elements()) * nl * nl);
    for (index_t t = 0; t < mesh_->n_elements(); ++t) {
      const double detJ = geometry(t).detJ;
      const index_t* dofs = element_dofs(t);
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          trips.emplace_back(static_cast<int>(dofs[i]), static_cast<int>(dofs[j]),
                             detJ * mref[static_cast<std::size_t>(i) * nl + j]);
    }
    SparseMatrix M(static_cast<int>(n_dofs_), static_cast<int>(n_dofs_));
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
  }

 private:
  void build_geometry() {
    geom_.resize(static_cast<std::size_t>(mesh_->n_elements()));
    for (index_t t = 0; t < mesh_->n_elements(); ++t) {
      auto c = mesh_->triangle_coords(t);
      ElementGeometry g;
      g.v0 = c[0];
      g.J[0][0] = c[1].x - c[0].x;
      g.J[1][0] = c[1].y - c[0].y;
      g.J[0][1] = c[2].x - c[0].x;
      g.J[1][1] = c[2].y - c[0].y;
      g.detJ = g.J[0][0] * g.J[1][1] - g.J[0][1] * g.J[1][0];
      require(g.detJ > 0, "Space: non-CCW element");
      g.Jinv[0][0] = g.J[1][1] / g.detJ;
      g.Jinv[0][1] = -g.J[0][1] / g.detJ;
      g.Jinv[1][0] = -g.J[1][0] / g.detJ;
      g.Jinv[1][1] = g.J[0][0] / g.detJ;
      geom_[static_cast<std::size_t>(t)] = g;
    }
  }

  void build_dofs() {
    const Mesh& m = *mesh_;
    const int k = degree_;
    const int ne = k - 1;                      // dofs per facet
    const int ni = ref_.n_interior_nodes();    // dofs per element interior

    vertex_dof_.assign(m.vertices.size(), -1);
    n_vertex_dofs_ = 0;
    for (index_t v = 0; v < m.n_vertices(); ++v) {
      index_t rep = m.vertex_rep[static_cast<std::size_t>(v)];
      if (rep == v) vertex_dof_[static_cast<std::size_t>(v)] = n_vertex_dofs_++;
    }
    const index_t edge_base = n_vertex_dofs_;
    const index_t interior_base =
        edge_base + static_cast<index_t>(m.facets.size()) * ne;
    n_dofs_ = interior_base + m.n_elements() * ni;

    const int nl = n_local_dofs();
    elem_dofs_.assign(static_cast<std::size_t>(m.n_elements()) * nl, -1);
    for (index_t t = 0; t < m.n_elements(); ++t) {
      index_t* dofs = elem_dofs_.data() + static_cast<std::size_t>(t) * nl;
      const auto& tri = m.triangles[static_cast<std::size_t>(t)];
      for (int v = 0; v < 3; ++v)
        dofs[v] = vertex_dof_[static_cast<std::size_t>(
            m.vertex_rep[static_cast<std::size_t>(tri[static_cast<std::size_t>(v)])])];
      for (int e = 0; e < 3; ++e) {
        index_t fid = m.elem_facets[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
        const Facet& f = m.facets[static_cast<std::size_t>(fid)];
        // Local edge e runs from local vertex (e+1)%3 to (e+2)%3; the facet
        // runs from v0 to v1 (ordered by representative). Flip if they differ.
        index_t local_start_rep =
            m.vertex_rep[static_cast<std::size_t>(tri[static_cast<std::size_t>((e + 1) % 3)])];
        bool forward =
            local_start_rep == m.vertex_rep[static_cast<std::size_t>(f.v0)];
        for (int p = 0; p < ne; ++p) {
          int gpos = forward ? p : (ne - 1 - p);
          dofs[ref_.edge_node(e, p)] = edge_base + fid * ne + gpos;
        }
      }
      for (int p = 0; p < ni; ++p)
        dofs[ref_.interior_node(p)] = interior_base + t * ni + p;
    }

    dof_coords_.assign(static_cast<std::size_t>(n_dofs_), Vec2{});
    for (index_t v = 0; v < m.n_vertices(); ++v)
      if (m.vertex_rep[static_cast<std::size_t>(v)] == v)
        dof_coords_[static_cast<std::size_t>(vertex_dof_[static_cast<std::size_t>(v)])] =
            m.vertices[static_cast<std::size_t>(v)];
    for (std::size_t fid = 0; fid < m.facets.size(); ++fid) {
      const Facet& f = m.facets[fid];
      Vec2 p0 = m.vertices[static_cast<std::size_t>(f.v0)];
      Vec2 p1 = m.vertices[static_cast<std::size_t>(f.v1)];
      for (int p = 0; p < ne; ++p)
        dof_coords_[static_cast<std::size_t>(edge_base + static_cast<index_t>(fid) * ne + p)] =
            p0 + (p1 - p0) * (static_cast<double>(p + 1) / k);
    }
    for (index_t t = 0; t < m.n_elements(); ++t)
      for (int p = 0; p < ni; ++p)
        dof_coords_[static_cast<std::size_t>(interior_base + t * ni + p)] =
            map_to_physical(t, ref_.nodes()[static_cast<std::size_t>(ref_.interior_node(p))]);
  }

  void build_volume_tables() {
    const int nl = n_local_dofs();
    vol_N_.resize(vol_rule_.points.size() * static_cast<std::size_t>(nl));
    vol_dN_.resize(vol_rule_.points.size() * static_cast<std::size_t>(nl));
    std::vector<double> vals;
    std::vector<Vec2> grads;
    for (std::size_t q = 0; q < vol_rule_.points.size(); ++q) {
      ref_.eval(vol_rule_.points[q].xi, vals, grads);
      for (int i = 0; i < nl; ++i) {
        vol_N_[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)] =
            vals[static_cast<std::size_t>(i)];
        vol_dN_[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)] =
            grads[static_cast<std::size_t>(i)];
      }
    }
    node_dN_.resize(static_cast<std::size_t>(nl) * nl);
    for (int p = 0; p < nl; ++p) {
      ref_.eval(ref_.nodes()[static_cast<std::size_t>(p)], vals, grads);
      for (int i = 0; i < nl; ++i)
        node_dN_[static_cast<std::size_t>(p) * nl + static_cast<std::size_t>(i)] =
            grads[static_cast<std::size_t>(i)];
    }
  }

  void build_facet_tables() {
    const Mesh& m = *mesh_;
    const int nl = n_local_dofs();
    const int nq = n_facet_qp();
    facet_tables_.resize(m.facets.size());
    std::vector<double> vals;
    std::vector<Vec2> grads;
    for (std::size_t fid = 0; fid < m.facets.size(); ++fid) {
      const Facet& f = m.facets[fid];
      FacetTable& tab = facet_tables_[fid];
      Vec2 p0 = m.vertices[static_cast<std::size_t>(f.v0)];
      Vec2 p1 = m.vertices[static_cast<std::size_t>(f.v1)];
      tab.x.resize(static_cast<std::size_t>(nq));
      tab.w.resize(static_cast<std::size_t>(nq));
      for (int q = 0; q < nq; ++q) {
        const auto& qp = facet_rule_.points[static_cast<std::size_t>(q)];
        tab.x[static_cast<std::size_t>(q)] = p0 + (p1 - p0) * qp.x;
        tab.w[static_cast<std::size_t>(q)] = qp.w * f.length;
      }
      const int n_sides = f.is_interior() ? 2 : 1;
      for (int s = 0; s < n_sides; ++s) {
        index_t t = (s == 0) ? f.left : f.right;
        Vec2 shift = (s == 0) ? Vec2{0.0, 0.0} : f.right_shift;
        tab.N[s].resize(static_cast<std::size_t>(nq) * nl);
        tab.grad[s].resize(static_cast<std::size_t>(nq) * nl);
        for (int q = 0; q < nq; ++q) {
          Vec2 xi = map_to_reference(t, tab.x[static_cast<std::size_t>(q)] + shift);
          ref_.eval(xi, vals, grads);
          for (int i = 0; i < nl; ++i) {
            tab.N[s][static_cast<std::size_t>(q) * nl + static_cast<std::size_t>(i)] =
                vals[static_cast<std::size_t>(i)];
            tab.grad[s][static_cast<std::size_t>(q) * nl + static_cast<std::size_t>(i)] =
                physical_gradient(t, grads[static_cast<std::size_t>(i)]);
          }
        }
        tab.grad_end[s].resize(2 * static_cast<std::size_t>(nl));
        for (int p = 0; p < 2; ++p) {
          Vec2 endpoint = (p == 0) ? p0 : p1;
          Vec2 xi = map_to_reference(t, endpoint + shift);
          ref_.eval(xi, vals, grads);
          for (int i = 0; i < nl; ++i)
            tab.grad_end[s][static_cast<std::size_t>(p) * nl + static_cast<std::size_t>(i)] =
                physical_gradient(t, grads[static_cast<std::size_t>(i)]);
        }
      }
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  const ReferenceElement& ref_;
  TriangleRule vol_rule_;
  SegmentRule facet_rule_;

  index_t n_dofs_ = 0;
  index_t n_vertex_dofs_ = 0;
  std::vector<index_t> vertex_dof_;
  std::vector<index_t> elem_dofs_;
  std::vector<Vec2> dof_coords_;
  std::vector<ElementGeometry> geom_;
  std::vector<double> vol_N_;
  std::vector<Vec2> vol_dN_;
  std::vector<Vec2> node_dN_;
  std::vector<FacetTable> facet_tables_;
};

/// L2 norm of a discrete field minus a reference function, over a region.
inline double l2_error(const Field& field,
                       const std::function<double(Vec2)>& exact,
                       const RegionMask* region = nullptr) {
  const Space& sp = *field.space;
  double total = 0.0;
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    if (region && !region->contains(t)) continue;
    const double detJ = sp.geometry(t).detJ;
    const index_t* dofs = sp.element_dofs(t);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double v = 0.0;
      for (int i = 0; i < sp.n_local_dofs(); ++i)
        v += field.coeffs[dofs[i]] * sp.volume_basis(q, i);
      double d = v - exact(sp.map_to_physical(t, qp.xi));
      total += qp.w * detJ * d * d;
    }
  }
  return std::sqrt(total);
}

}  // namespace cipad
