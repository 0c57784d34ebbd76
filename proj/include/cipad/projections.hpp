#pragma once

/// @file projections.hpp
/// Elementwise (discontinuous) fields plus the two maps between them and the
/// conforming space: Oswald averaging into C^0 and the global L2 projection.

#include <functional>
#include <memory>
#include <vector>

#include "cipad/linalg.hpp"
#include "cipad/space.hpp"

namespace cipad {

/// Per-element Lagrange coefficients; no continuity across facets.
struct DGField {
  std::shared_ptr<const Space> space;
  std::vector<double> coeffs;  // [element * n_local + i]

  double& at(index_t t, int i) {
    return coeffs[static_cast<std::size_t>(t) *
                      static_cast<std::size_t>(space->n_local_dofs()) +
                  static_cast<std::size_t>(i)];
  }
  double at(index_t t, int i) const {
    return coeffs[static_cast<std::size_t>(t) *
                      static_cast<std::size_t>(space->n_local_dofs()) +
                  static_cast<std::size_t>(i)];
  }
};

inline DGField make_dg(std::shared_ptr<const Space> space) {
  DGField v;
  v.coeffs.assign(static_cast<std::size_t>(space->mesh().n_elements()) *
                      static_cast<std::size_t>(space->n_local_dofs()),
                  0.0);
  v.space = std::move(space);
  return v;
}

/// Inclusion of a conforming field into the elementwise representation.
inline DGField to_dg(const Field& f) {
  DGField v = make_dg(f.space);
  const Space& sp = *f.space;
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    const index_t* dofs = sp.element_dofs(t);
    for (int i = 0; i < sp.n_local_dofs(); ++i) v.at(t, i) = f.coeffs[dofs[i]];
  }
  return v;
}

/// Elementwise nodal interpolation of g(element, physical point).
inline DGField dg_interpolate(std::shared_ptr<const Space> space,
                              const std::function<double(index_t, Vec2)>& g) {
  DGField v = make_dg(space);
  const Space& sp = *v.space;
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    auto nodes = sp.element_node_coords(t);
    for (int i = 0; i < sp.n_local_dofs(); ++i)
      v.at(t, i) = g(t, nodes[static_cast<std::size_t>(i)]);
  }
  return v;
}

inline EvalResult evaluate_dg(const DGField& v, index_t t, const Vec2& xi) {
  const Space& sp = *v.space;
  std::vector<double> vals;
  std::vector<Vec2> grads;
  sp.ref().eval(xi, vals, grads);
  EvalResult r;
  Vec2 ref_grad{};
  for (int i = 0; i < sp.n_local_dofs(); ++i) {
    r.value += v.at(t, i) * vals[static_cast<std::size_t>(i)];
    ref_grad += v.at(t, i) * grads[static_cast<std::size_t>(i)];
  }
  r.gradient = sp.physical_gradient(t, ref_grad);
  return r;
}

/// Oswald averaging: every conforming dof receives the arithmetic mean of
/// the values contributed by the elements sharing it. Continuous inputs are
/// reproduced exactly.
inline Field oswald_average(const DGField& v) {
  const Space& sp = *v.space;
  Field out{v.space, Vector::Zero(sp.n_dofs())};
  Vector count = Vector::Zero(sp.n_dofs());
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    const index_t* dofs = sp.element_dofs(t);
    for (int i = 0; i < sp.n_local_dofs(); ++i) {
      out.coeffs[dofs[i]] += v.at(t, i);
      count[dofs[i]] += 1.0;
    }
  }
  for (index_t d = 0; d < sp.n_dofs(); ++d) {
    require(count[d] > 0.0, "oswald_average: dof with no incident element");
    out.coeffs[d] /= count[d];
  }
  return out;
}

/// Load vector (g, phi_i) for an integrand evaluable per element.
inline Vector assemble_load(const Space& sp,
                            const std::function<double(index_t, Vec2)>& g) {
  Vector b = Vector::Zero(sp.n_dofs());
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    const double detJ = sp.geometry(t).detJ;
    const index_t* dofs = sp.element_dofs(t);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double gv = g(t, sp.map_to_physical(t, qp.xi)) * qp.w * detJ;
      for (int i = 0; i < sp.n_local_dofs(); ++i)
        b[dofs[i]] += gv * sp.volume_basis(q, i);
    }
  }
  return b;
}

/// Global L2 projection onto the conforming space (mass solve).
inline Field l2_project(std::shared_ptr<const Space> space, const MassSolver& mass,
                        const std::function<double(index_t, Vec2)>& g) {
  Vector b = assemble_load(*space, g);
  return Field{std::move(space), mass.solve(b)};
}

inline Field l2_project(const DGField& v, const MassSolver& mass) {
  const Space& sp = *v.space;
  // The integrand is polynomial per element; reuse the cached basis tables
  // instead of re-evaluating through the generic callback.
  Vector b = Vector::Zero(sp.n_dofs());
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    const double detJ = sp.geometry(t).detJ;
    const index_t* dofs = sp.element_dofs(t);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0;
      for (int i = 0; i < sp.n_local_dofs(); ++i)
        val += v.at(t, i) * sp.volume_basis(q, i);
      val *= sp.volume_rule().points[static_cast<std::size_t>(q)].w * detJ;
      for (int i = 0; i < sp.n_local_dofs(); ++i)
        b[dofs[i]] += val * sp.volume_basis(q, i);
    }
  }
  return Field{v.space, mass.solve(b)};
}

/// L2 norm of the difference between an elementwise field and its average,
/// plus the facet-jump seminorm it is controlled by; both used in tests and
/// diagnostics.
inline double dg_l2_norm(const DGField& v) {
  const Space& sp = *v.space;
  double total = 0.0;
  for (index_t t = 0; t < sp.mesh().n_elements(); ++t) {
    const double detJ = sp.geometry(t).detJ;
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0;
      for (int i = 0; i < sp.n_local_dofs(); ++i)
        val += v.at(t, i) * sp.volume_basis(q, i);
      total += sp.volume_rule().points[static_cast<std::size_t>(q)].w * detJ * val * val;
    }
  }
  return std::sqrt(total);
}

/// Sum over interior facets of h_F * ||[v]||^2_F (value jumps).
inline double dg_jump_seminorm_sq(const DGField& v) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  double total = 0.0;
  for (std::size_t fid = 0; fid < mesh.facets.size(); ++fid) {
    const Facet& f = mesh.facets[fid];
    if (!f.is_interior()) continue;
    const auto& tab = sp.facet_table(static_cast<index_t>(fid));
    double acc = 0.0;
    for (int q = 0; q < sp.n_facet_qp(); ++q) {
      double vl = 0.0, vr = 0.0;
      for (int i = 0; i < sp.n_local_dofs(); ++i) {
        vl += v.at(f.left, i) *
              tab.N[0][static_cast<std::size_t>(q) * sp.n_local_dofs() + i];
        vr += v.at(f.right, i) *
              tab.N[1][static_cast<std::size_t>(q) * sp.n_local_dofs() + i];
      }
      acc += tab.w[static_cast<std::size_t>(q)] * (vl - vr) * (vl - vr);
    }
    total += f.length * acc;
  }
  return total;
}

}  // namespace cipad
