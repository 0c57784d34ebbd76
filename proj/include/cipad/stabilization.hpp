#pragma once

/// @file stabilization.hpp
/// Residual indicator, nonlinear switch, and the two stabilisation forms:
/// a gradient-jump penalty on interior facets (weighted by 1 - varpi) and
/// first-order artificial diffusion (weighted by varpi).
///
/// Form conventions. With switch values varpi_T in [0,1]:
///   jump form      s0(u,v) = sum_T h_T^2 (1-varpi_T)
///                              int_{dT \ boundary} |beta| [dn u][dn v] ds,
///   diffusion form s1(u,v) = sum_T h_T varpi_T int_T |beta| grad u . grad v.
/// The element-boundary sum visits every interior facet from both sides.
///
/// Two evaluation routes exist on purpose: direct quadrature loops
/// (`s0_apply`, `s1_apply`) and cached-block operators (`StabOperators`) used
/// by the time stepper and the sparse-matrix route; tests pin them together.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "cipad/space.hpp"

namespace cipad {

enum class ForceSwitch { none, zero, one };

struct StabParams {
  double sigma0 = 0.01;  // jump-penalty weight
  double sigma1 = 0.01;  // artificial-diffusion weight
  double alpha = 4.0;    // switch exponent
  double U = 1.0;        // residual normalisation scale
  double rho1 = 0.0;     // facet-jump residual term toggle (0 or 1)
  double rho2 = 1.0;     // bulk residual term toggle (0 or 1)
  ForceSwitch force_switch = ForceSwitch::none;

  void validate() const {
    require(sigma0 >= 0.0 && sigma1 >= 0.0, "StabParams: negative weight");
    require(alpha >= 0.0, "StabParams: negative switch exponent");
    require(U > 0.0, "StabParams: residual scale must be positive");
    require((rho1 == 0.0 || rho1 == 1.0) && (rho2 == 0.0 || rho2 == 1.0),
            "StabParams: residual toggles must be 0 or 1");
    require(sigma1 == 0.0 || rho1 + rho2 >= 1.0,
            "StabParams: diffusion is active but the residual indicator is empty");
  }
};

struct SwitchField {
  std::vector<double> indicator;  // R_T per element
  std::vector<double> varpi;      // switch value per element, in [0,1]
};

/// Residual indicator per element:
///   R_T = rho1 * max over interior facets of dT of max |[grad w . n]|
///       + rho2 * max over element sample points of |dt_w + beta.grad w - f_h|.
/// Sup norms are sampled: facet Gauss points plus facet endpoints for the
/// jump part, volume quadrature points plus Lagrange nodes for the bulk part.
inline std::vector<double> residual_indicator(const Field& w, const Field& dt_w,
                                              const Field* f_h, Vec2 beta,
                                              const StabParams& p) {
  const Space& sp = *w.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  std::vector<double> R(static_cast<std::size_t>(mesh.n_elements()), 0.0);

  if (p.rho1 != 0.0) {
    std::vector<double> facet_max(mesh.facets.size(), 0.0);
    for (std::size_t fid = 0; fid < mesh.facets.size(); ++fid) {
      const Facet& f = mesh.facets[fid];
      if (!f.is_interior()) continue;
      const auto& tab = sp.facet_table(static_cast<index_t>(fid));
      const index_t* dl = sp.element_dofs(f.left);
      const index_t* dr = sp.element_dofs(f.right);
      double m = 0.0;
      for (int q = 0; q < sp.n_facet_qp(); ++q) {
        double jump = 0.0;
        for (int i = 0; i < nl; ++i) {
          jump += w.coeffs[dl[i]] *
                  dot(tab.grad[0][static_cast<std::size_t>(q) * nl + i], f.normal);
          jump -= w.coeffs[dr[i]] *
                  dot(tab.grad[1][static_cast<std::size_t>(q) * nl + i], f.normal);
        }
        m = std::max(m, std::abs(jump));
      }
      for (int e = 0; e < 2; ++e) {
        double jump = 0.0;
        for (int i = 0; i < nl; ++i) {
          jump += w.coeffs[dl[i]] *
                  dot(tab.grad_end[0][static_cast<std::size_t>(e) * nl + i], f.normal);
          jump -= w.coeffs[dr[i]] *
                  dot(tab.grad_end[1][static_cast<std::size_t>(e) * nl + i], f.normal);
        }
        m = std::max(m, std::abs(jump));
      }
      facet_max[fid] = m;
    }
    for (index_t t = 0; t < mesh.n_elements(); ++t) {
      double m = 0.0;
      for (index_t fid : mesh.elem_facets[static_cast<std::size_t>(t)])
        if (mesh.facets[static_cast<std::size_t>(fid)].is_interior())
          m = std::max(m, facet_max[static_cast<std::size_t>(fid)]);
      R[static_cast<std::size_t>(t)] += p.rho1 * m;
    }
  }

  if (p.rho2 != 0.0) {
    for (index_t t = 0; t < mesh.n_elements(); ++t) {
      const index_t* dofs = sp.element_dofs(t);
      double m = 0.0;
      for (int q = 0; q < sp.n_volume_qp(); ++q) {
        double val = 0.0;
        Vec2 ref_grad{};
        for (int i = 0; i < nl; ++i) {
          double c = w.coeffs[dofs[i]];
          ref_grad += c * sp.volume_basis_ref_grad(q, i);
          val += (dt_w.coeffs[dofs[i]] - (f_h ? f_h->coeffs[dofs[i]] : 0.0)) *
                 sp.volume_basis(q, i);
        }
        val += dot(beta, sp.physical_gradient(t, ref_grad));
        m = std::max(m, std::abs(val));
      }
      for (int pnode = 0; pnode < nl; ++pnode) {
        Vec2 ref_grad{};
        for (int i = 0; i < nl; ++i)
          ref_grad += w.coeffs[dofs[i]] * sp.node_basis_ref_grad(pnode, i);
        double val = dt_w.coeffs[dofs[pnode]] -
                     (f_h ? f_h->coeffs[dofs[pnode]] : 0.0) +
                     dot(beta, sp.physical_gradient(t, ref_grad));
        m = std::max(m, std::abs(val));
      }
      R[static_cast<std::size_t>(t)] += p.rho2 * m;
    }
  }
  return R;
}

/// varpi_T = min(1, h_T R_T / U)^alpha, with optional forcing override.
inline std::vector<double> switch_from_indicator(const std::vector<double>& R,
                                                 const std::vector<double>& h_elem,
                                                 const StabParams& p) {
  std::vector<double> varpi(R.size(), 0.0);
  for (std::size_t t = 0; t < R.size(); ++t) {
    switch (p.force_switch) {
      case ForceSwitch::zero: varpi[t] = 0.0; break;
      case ForceSwitch::one: varpi[t] = 1.0; break;
      case ForceSwitch::none: {
        double base = std::min(1.0, h_elem[t] * R[t] / p.U);
        varpi[t] = std::pow(base, p.alpha);
        break;
      }
    }
  }
  return varpi;
}

inline SwitchField switch_field(const Field& w, const Field& dt_w, const Field* f_h,
                                Vec2 beta, const StabParams& p) {
  SwitchField s;
  s.indicator = residual_indicator(w, dt_w, f_h, beta, p);
  s.varpi = switch_from_indicator(s.indicator, w.space->mesh().h_elem, p);
  return s;
}

/// Direct quadrature evaluation of the jump form; the reference the cached
/// operators are checked against.
inline double s0_apply(const std::vector<double>& varpi, const Field& u,
                       const Field& v, Vec2 beta) {
  const Space& sp = *u.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  const double beta_mag = norm(beta);
  double total = 0.0;
  for (index_t t = 0; t < mesh.n_elements(); ++t) {
    const double hT = mesh.h_elem[static_cast<std::size_t>(t)];
    const double wT = hT * hT * (1.0 - varpi[static_cast<std::size_t>(t)]);
    if (wT == 0.0) continue;
    for (index_t fid : mesh.elem_facets[static_cast<std::size_t>(t)]) {
      const Facet& f = mesh.facets[static_cast<std::size_t>(fid)];
      if (!f.is_interior()) continue;
      const auto& tab = sp.facet_table(fid);
      const index_t* dl = sp.element_dofs(f.left);
      const index_t* dr = sp.element_dofs(f.right);
      double acc = 0.0;
      for (int q = 0; q < sp.n_facet_qp(); ++q) {
        double ju = 0.0, jv = 0.0;
        for (int i = 0; i < nl; ++i) {
          double gl = dot(tab.grad[0][static_cast<std::size_t>(q) * nl + i], f.normal);
          double gr = dot(tab.grad[1][static_cast<std::size_t>(q) * nl + i], f.normal);
          ju += u.coeffs[dl[i]] * gl - u.coeffs[dr[i]] * gr;
          jv += v.coeffs[dl[i]] * gl - v.coeffs[dr[i]] * gr;
        }
        acc += tab.w[static_cast<std::size_t>(q)] * ju * jv;
      }
      total += wT * beta_mag * acc;
    }
  }
  return total;
}

/// Direct quadrature evaluation of the artificial-diffusion form.
inline double s1_apply(const std::vector<double>& varpi, const Field& u,
                       const Field& v, Vec2 beta) {
  const Space& sp = *u.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  const double beta_mag = norm(beta);
  double total = 0.0;
  for (index_t t = 0; t < mesh.n_elements(); ++t) {
    const double wT = mesh.h_elem[static_cast<std::size_t>(t)] *
                      varpi[static_cast<std::size_t>(t)];
    if (wT == 0.0) continue;
    const double detJ = sp.geometry(t).detJ;
    const index_t* dofs = sp.element_dofs(t);
    double acc = 0.0;
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      Vec2 gu_ref{}, gv_ref{};
      for (int i = 0; i < nl; ++i) {
        gu_ref += u.coeffs[dofs[i]] * sp.volume_basis_ref_grad(q, i);
        gv_ref += v.coeffs[dofs[i]] * sp.volume_basis_ref_grad(q, i);
      }
      acc += sp.volume_rule().points[static_cast<std::size_t>(q)].w * detJ *
             dot(sp.physical_gradient(t, gu_ref), sp.physical_gradient(t, gv_ref));
    }
    total += wT * beta_mag * acc;
  }
  return total;
}

/// Cached-block realisation of both forms. Per interior facet it stores the
/// Gram matrix of normal-gradient jumps over the union of both elements'
/// dofs; per element the stiffness block. Switch values only scale blocks,
/// so per-stage application is a gather/scatter.
class StabOperators {
 public:
  StabOperators(std::shared_ptr<const Space> space, Vec2 beta)
      : space_(std::move(space)), beta_(beta), beta_mag_(norm(beta)) {
    build_facet_blocks();
    build_element_blocks();
  }

  const Space& space() const { return *space_; }
  Vec2 beta() const { return beta_; }

  /// out += scale * S0(varpi) * u
  void add_s0(const std::vector<double>& varpi, const Vector& u, Vector& out,
              double scale = 1.0) const {
    const Mesh& mesh = space_->mesh();
    for (const auto& blk : facet_blocks_) {
      const Facet& f = mesh.facets[static_cast<std::size_t>(blk.fid)];
      double c = facet_scale(f, varpi) * scale;
      if (c == 0.0) continue;
      const int n = static_cast<int>(blk.dofs.size());
      Eigen::VectorXd local(n);
      for (int a = 0; a < n; ++a) local[a] = u[blk.dofs[static_cast<std::size_t>(a)]];
      Eigen::VectorXd y = blk.G * local;
      for (int a = 0; a < n; ++a) out[blk.dofs[static_cast<std::size_t>(a)]] += c * y[a];
    }
  }

  /// out += scale * S1(varpi) * u
  void add_s1(const std::vector<double>& varpi, const Vector& u, Vector& out,
              double scale = 1.0) const {
    const Mesh& mesh = space_->mesh();
    const int nl = space_->n_local_dofs();
    for (index_t t = 0; t < mesh.n_elements(); ++t) {
      double c = beta_mag_ * mesh.h_elem[static_cast<std::size_t>(t)] *
                 varpi[static_cast<std::size_t>(t)] * scale;
      if (c == 0.0) continue;
      const index_t* dofs = space_->element_dofs(t);
      const auto& K = elem_K_[static_cast<std::size_t>(t)];
      Eigen::VectorXd local(nl);
      for (int a = 0; a < nl; ++a) local[a] = u[dofs[a]];
      Eigen::VectorXd y = K * local;
      for (int a = 0; a < nl; ++a) out[dofs[a]] += c * y[a];
    }
  }

  Vector apply_s0(const std::vector<double>& varpi, const Vector& u) const {
    Vector out = Vector::Zero(u.size());
    add_s0(varpi, u, out);
    return out;
  }
  Vector apply_s1(const std::vector<double>& varpi, const Vector& u) const {
    Vector out = Vector::Zero(u.size());
    add_s1(varpi, u, out);
    return out;
  }

  double bilinear_s0(const std::vector<double>& varpi, const Vector& u,
                     const Vector& v) const {
    return v.dot(apply_s0(varpi, u));
  }
  double bilinear_s1(const std::vector<double>& varpi, const Vector& u,
                     const Vector& v) const {
    return v.dot(apply_s1(varpi, u));
  }

  /// Materialise both operators as sparse matrices for the current switch.
  std::pair<SparseMatrix, SparseMatrix> to_sparse(
      const std::vector<double>& varpi) const {
    const Mesh& mesh = space_->mesh();
    const int n = static_cast<int>(space_->n_dofs());
    const int nl = space_->n_local_dofs();
    std::vector<Triplet> t0, t1;
    for (const auto& blk : facet_blocks_) {
      const Facet& f = mesh.facets[static_cast<std::size_t>(blk.fid)];
      double c = facet_scale(f, varpi);
      const int nb = static_cast<int>(blk.dofs.size());
      for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b)
          t0.emplace_back(static_cast<int>(blk.dofs[static_cast<std::size_t>(a)]),
                          static_cast<int>(blk.dofs[static_cast<std::size_t>(b)]),
                          c * blk.G(a, b));
    }
    for (index_t t = 0; t < mesh.n_elements(); ++t) {
      double c = beta_mag_ * mesh.h_elem[static_cast<std::size_t>(t)] *
                 varpi[static_cast<std::size_t>(t)];
      const index_t* dofs = space_->element_dofs(t);
      const auto& K = elem_K_[static_cast<std::size_t>(t)];
      for (int a = 0; a < nl; ++a)
        for (int b = 0; b < nl; ++b)
          t1.emplace_back(static_cast<int>(dofs[a]), static_cast<int>(dofs[b]),
                          c * K(a, b));
    }
    SparseMatrix S0(n, n), S1(n, n);
    S0.setFromTriplets(t0.begin(), t0.end());
    S1.setFromTriplets(t1.begin(), t1.end());
    return {std::move(S0), std::move(S1)};
  }

 private:
  struct FacetBlock {
    index_t fid;
    std::vector<index_t> dofs;  // union of both sides' dofs
    Eigen::MatrixXd G;          // Gram matrix of normal-gradient jumps
  };

  double facet_scale(const Facet& f, const std::vector<double>& varpi) const {
    double hl = space_->mesh().h_elem[static_cast<std::size_t>(f.left)];
    double hr = space_->mesh().h_elem[static_cast<std::size_t>(f.right)];
    return beta_mag_ * (hl * hl * (1.0 - varpi[static_cast<std::size_t>(f.left)]) +
                        hr * hr * (1.0 - varpi[static_cast<std::size_t>(f.right)]));
  }

  void build_facet_blocks() {
    const Mesh& mesh = space_->mesh();
    const int nl = space_->n_local_dofs();
    for (std::size_t fid = 0; fid < mesh.facets.size(); ++fid) {
      const Facet& f = mesh.facets[fid];
      if (!f.is_interior()) continue;
      const auto& tab = space_->facet_table(static_cast<index_t>(fid));
      const index_t* dl = space_->element_dofs(f.left);
      const index_t* dr = space_->element_dofs(f.right);
      FacetBlock blk;
      blk.fid = static_cast<index_t>(fid);
      for (int i = 0; i < nl; ++i) blk.dofs.push_back(dl[i]);
      for (int i = 0; i < nl; ++i)
        if (std::find(blk.dofs.begin(), blk.dofs.end(), dr[i]) == blk.dofs.end())
          blk.dofs.push_back(dr[i]);
      const int nb = static_cast<int>(blk.dofs.size());
      // Signed jump coefficient of each combined dof at each quad point.
      Eigen::MatrixXd J(space_->n_facet_qp(), nb);
      J.setZero();
      for (int q = 0; q < space_->n_facet_qp(); ++q) {
        for (int i = 0; i < nl; ++i) {
          double gl = dot(tab.grad[0][static_cast<std::size_t>(q) * nl + i], f.normal);
          double gr = dot(tab.grad[1][static_cast<std::size_t>(q) * nl + i], f.normal);
          int al = static_cast<int>(std::find(blk.dofs.begin(), blk.dofs.end(), dl[i]) -
                                    blk.dofs.begin());
          int ar = static_cast<int>(std::find(blk.dofs.begin(), blk.dofs.end(), dr[i]) -
                                    blk.dofs.begin());
          J(q, al) += gl;
          J(q, ar) -= gr;
        }
      }
      blk.G.resize(nb, nb);
      blk.G.setZero();
      for (int q = 0; q < space_->n_facet_qp(); ++q)
        blk.G += tab.w[static_cast<std::size_t>(q)] * J.row(q).transpose() * J.row(q);
      facet_blocks_.push_back(std::move(blk));
    }
  }

  void build_element_blocks() {
    const Mesh& mesh = space_->mesh();
    const int nl = space_->n_local_dofs();
    elem_K_.resize(static_cast<std::size_t>(mesh.n_elements()));
    for (index_t t = 0; t < mesh.n_elements(); ++t) {
      Eigen::MatrixXd K(nl, nl);
      K.setZero();
      const double detJ = space_->geometry(t).detJ;
      for (int q = 0; q < space_->n_volume_qp(); ++q) {
        double w = space_->volume_rule().points[static_cast<std::size_t>(q)].w * detJ;
        for (int a = 0; a < nl; ++a) {
          Vec2 ga = space_->physical_gradient(t, space_->volume_basis_ref_grad(q, a));
          for (int b = 0; b < nl; ++b) {
            Vec2 gb = space_->physical_gradient(t, space_->volume_basis_ref_grad(q, b));
            K(a, b) += w * dot(ga, gb);
          }
        }
      }
      elem_K_[static_cast<std::size_t>(t)] = std::move(K);
    }
  }

  std::shared_ptr<const Space> space_;
  Vec2 beta_;
  double beta_mag_;
  std::vector<FacetBlock> facet_blocks_;
  std::vector<Eigen::MatrixXd> elem_K_;
};

}  // namespace cipad
