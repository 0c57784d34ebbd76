#pragma once

/// @file transport.hpp
/// Assembly of the semi-discrete transport system
///   M du/dt = l(t) - (A + B_in + sigma0 S0(varpi) + sigma1 S1(varpi)) u,
/// where A is the advection operator (beta . grad u, v), B_in the weak
/// inflow penalty (|beta.n| u, v) over the inflow boundary, and l(t)
/// collects the volume forcing and inflow data terms.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "cipad/linalg.hpp"
#include "cipad/projections.hpp"
#include "cipad/space.hpp"
#include "cipad/stabilization.hpp"

namespace cipad {

using SpaceTimeFn = std::function<double(Vec2, double)>;

/// A_ij = int (beta . grad phi_j) phi_i dx. Exact for constant beta.
inline SparseMatrix assemble_advection(const Space& sp, Vec2 beta) {
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh.n_elements() * nl * nl));
  for (index_t t = 0; t < mesh.n_elements(); ++t) {
    const double detJ = sp.geometry(t).detJ;
    const index_t* dofs = sp.element_dofs(t);
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) {
        double val = 0.0;
        for (int q = 0; q < sp.n_volume_qp(); ++q) {
          double w = sp.volume_rule().points[static_cast<std::size_t>(q)].w * detJ;
          val += w * sp.volume_basis(q, a) *
                 dot(beta, sp.physical_gradient(t, sp.volume_basis_ref_grad(q, b)));
        }
        trips.emplace_back(static_cast<int>(dofs[a]), static_cast<int>(dofs[b]), val);
      }
  }
  SparseMatrix A(static_cast<int>(sp.n_dofs()), static_cast<int>(sp.n_dofs()));
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

/// Boundary facets with beta pointing into the domain.
inline bool is_inflow_facet(const Facet& f, Vec2 beta) {
  return !f.is_interior() && dot(beta, f.normal) < 0.0;
}

/// B_ij = int_{inflow} |beta.n| phi_j phi_i ds.
inline SparseMatrix assemble_inflow_matrix(const Space& sp, Vec2 beta) {
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  std::vector<Triplet> trips;
  for (std::size_t fid = 0; fid < mesh.facets.size(); ++fid) {
    const Facet& f = mesh.facets[fid];
    if (!is_inflow_facet(f, beta)) continue;
    const double bn = std::abs(dot(beta, f.normal));
    const auto& tab = sp.facet_table(static_cast<index_t>(fid));
    const index_t* dofs = sp.element_dofs(f.left);
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) {
        double val = 0.0;
        for (int q = 0; q < sp.n_facet_qp(); ++q)
          val += tab.w[static_cast<std::size_t>(q)] * bn *
                 tab.N[0][static_cast<std::size_t>(q) * nl + a] *
                 tab.N[0][static_cast<std::size_t>(q) * nl + b];
        trips.emplace_back(static_cast<int>(dofs[a]), static_cast<int>(dofs[b]), val);
      }
  }
  SparseMatrix B(static_cast<int>(sp.n_dofs()), static_cast<int>(sp.n_dofs()));
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

/// b_i = int_{inflow} |beta.n| g(x,t) phi_i ds.
inline Vector assemble_inflow_vector(const Space& sp, Vec2 beta, const SpaceTimeFn& g,
                                     double t) {
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  Vector b = Vector::Zero(sp.n_dofs());
  for (std::size_t fid = 0; fid < mesh.facets.size(); ++fid) {
    const Facet& f = mesh.facets[fid];
    if (!is_inflow_facet(f, beta)) continue;
    const double bn = std::abs(dot(beta, f.normal));
    const auto& tab = sp.facet_table(static_cast<index_t>(fid));
    const index_t* dofs = sp.element_dofs(f.left);
    for (int q = 0; q < sp.n_facet_qp(); ++q) {
      double gw = tab.w[static_cast<std::size_t>(q)] * bn *
                  g(tab.x[static_cast<std::size_t>(q)], t);
      for (int a = 0; a < nl; ++a)
        b[dofs[a]] += gw * tab.N[0][static_cast<std::size_t>(q) * nl + a];
    }
  }
  return b;
}

/// b_i = int f(x,t) phi_i dx.
inline Vector assemble_forcing_vector(const Space& sp, const SpaceTimeFn& f, double t) {
  return assemble_load(sp, [&](index_t, Vec2 x) { return f(x, t); });
}

/// Owns every operator of the semi-discrete system and evaluates its
/// right-hand side. The switch field is an argument, not a member: the time
/// stepper recomputes it per stage.
class TransportSystem {
 public:
  TransportSystem(std::shared_ptr<const Space> space, Vec2 beta, StabParams stab,
                  SpaceTimeFn forcing = {}, bool weak_inflow = false,
                  SpaceTimeFn inflow_data = {})
      : space_(std::move(space)),
        beta_(beta),
        stab_(stab),
        forcing_(std::move(forcing)),
        weak_inflow_(weak_inflow),
        inflow_data_(std::move(inflow_data)),
        mass_(space_->assemble_mass()),
        A_(assemble_advection(*space_, beta)),
        B_(weak_inflow ? assemble_inflow_matrix(*space_, beta)
                       : SparseMatrix(static_cast<int>(space_->n_dofs()),
                                      static_cast<int>(space_->n_dofs()))),
        ops_(space_, beta) {
    stab_.validate();
  }

  const Space& space() const { return *space_; }
  std::shared_ptr<const Space> space_ptr() const { return space_; }
  Vec2 beta() const { return beta_; }
  const StabParams& stab() const { return stab_; }
  StabParams& stab() { return stab_; }
  const SparseMatrix& advection() const { return A_; }
  const SparseMatrix& inflow_penalty() const { return B_; }
  const SparseMatrix& mass_matrix() const { return mass_.matrix(); }
  MassSolver& mass() { return mass_; }
  const StabOperators& stab_ops() const { return ops_; }
  bool has_forcing() const { return static_cast<bool>(forcing_); }
  bool weak_inflow() const { return weak_inflow_; }

  /// Forcing interpolant at time t (zero field when no forcing is set);
  /// this is the f_h the residual indicator samples.
  Field forcing_field(double t) const {
    if (!forcing_) return space_->make_field();
    return space_->interpolate_nodal([&](Vec2 x) { return forcing_(x, t); });
  }

  /// l(t) = volume forcing + inflow data terms.
  Vector load(double t) const {
    Vector b = forcing_ ? assemble_forcing_vector(*space_, forcing_, t)
                        : Vector(Vector::Zero(space_->n_dofs()));
    if (weak_inflow_ && inflow_data_)
      b += assemble_inflow_vector(*space_, beta_, inflow_data_, t);
    return b;
  }

  /// r(u,t;varpi) = l(t) - (A + B_in) u - sigma0 S0(varpi) u - sigma1 S1(varpi) u.
  Vector residual(const Vector& u, double t, const std::vector<double>& varpi) const {
    Vector r = load(t);
    r -= A_ * u;
    if (weak_inflow_) r -= B_ * u;
    if (stab_.sigma0 != 0.0) ops_.add_s0(varpi, u, r, -stab_.sigma0);
    if (stab_.sigma1 != 0.0) ops_.add_s1(varpi, u, r, -stab_.sigma1);
    return r;
  }

  /// du/dt = M^{-1} r(u,t;varpi); `guess` warm-starts the mass solve.
  Vector time_derivative(const Vector& u, double t, const std::vector<double>& varpi) {
    return mass_.solve(residual(u, t, varpi));
  }
  Vector time_derivative(const Vector& u, double t, const std::vector<double>& varpi,
                         const Vector& guess) {
    return mass_.solve(residual(u, t, varpi), guess);
  }

 private:
  std::shared_ptr<const Space> space_;
  Vec2 beta_;
  StabParams stab_;
  SpaceTimeFn forcing_;
  bool weak_inflow_;
  SpaceTimeFn inflow_data_;
  MassSolver mass_;
  SparseMatrix A_;
  SparseMatrix B_;
  StabOperators ops_;
};

/// Defect of the semi-discrete relation measured on a trajectory window:
/// du/dt at the window centre is estimated by the 5-point central difference
/// (-u[4] + 8 u[3] - 8 u[1] + u[0]) / (12 dt), and the returned value is
/// ||M du_fd - r(u[2], t_mid)||_inf. For an exactly advanced trajectory this
/// decays like the stepper's local order plus quadrature error; passing five
/// identical steady states makes the derivative vanish and the value equals
/// the steady defect itself.
inline double galerkin_residual_check(const TransportSystem& sys,
                                      const std::array<Vector, 5>& window,
                                      double t_mid, double dt,
                                      const std::vector<double>& varpi) {
  Vector du = (-window[4] + 8.0 * window[3] - 8.0 * window[1] + window[0]) / (12.0 * dt);
  Vector defect = sys.mass_matrix() * du - sys.residual(window[2], t_mid, varpi);
  return defect.cwiseAbs().maxCoeff();
}

}  // namespace cipad
