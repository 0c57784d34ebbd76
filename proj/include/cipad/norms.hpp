#pragma once

/// @file norms.hpp
/// Weighted norms built on the transported weight: the weighted L2 norm,
/// the jump seminorm, the material-derivative residual norm, the combined
/// space-time norms accumulated along a trajectory, the projected test
/// function for the weighted stability diagnostic, and the element
/// partition used by shock experiments.
///
/// Conventions shared by everything here:
///  - a null Weight pointer means the weight is identically 1;
///  - weights are evaluated analytically at quadrature points, never
///    interpolated into the discrete space;
///  - mesh-size factors inside integrals use the per-element h_T.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cipad/linalg.hpp"
#include "cipad/mesh.hpp"
#include "cipad/projections.hpp"
#include "cipad/space.hpp"
#include "cipad/stabilization.hpp"
#include "cipad/types.hpp"
#include "cipad/weights.hpp"

namespace cipad {

inline double weight_value(const Weight* w, Vec2 x, double t) {
  return w ? w->value(x, t) : 1.0;
}

/// ||v||_phi^2 = integral of phi^2 v^2, optionally over a region.
inline double weighted_l2_sq(const Field& v, const Weight* w, double t,
                             const RegionMask* region = nullptr) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    if (region && !region->contains(e)) continue;
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0;
      for (int i = 0; i < nl; ++i) val += v.coeffs[dofs[i]] * sp.volume_basis(q, i);
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double phi = weight_value(w, sp.map_to_physical(e, qp.xi), t);
      total += qp.w * detJ * phi * phi * val * val;
    }
  }
  return total;
}

inline double weighted_l2(const Field& v, const Weight* w, double t,
                          const RegionMask* region = nullptr) {
  return std::sqrt(weighted_l2_sq(v, w, t, region));
}

/// ||v - g||_phi for an analytically known g; the workhorse of the
/// localisation rate studies.
inline double weighted_l2_error(const Field& v, const std::function<double(Vec2)>& g,
                                const Weight* w, double t,
                                const RegionMask* region = nullptr) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    if (region && !region->contains(e)) continue;
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0;
      for (int i = 0; i < nl; ++i) val += v.coeffs[dofs[i]] * sp.volume_basis(q, i);
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      Vec2 x = sp.map_to_physical(e, qp.xi);
      double phi = weight_value(w, x, t);
      double d = val - g(x);
      total += qp.w * detJ * phi * phi * d * d;
    }
  }
  return std::sqrt(total);
}

/// |phi v|_s^2, facet-wise: sum over elements of
///   h_T^2 sum_{interior facets of T} int |beta| phi^2 [[grad v . n]]^2.
/// The weight is evaluated on the element's own geometric copy of the
/// facet, so periodic identifications see the weight where the element
/// actually lives.
inline double weighted_s_seminorm_sq(const Field& v, Vec2 beta, const Weight* w,
                                     double t) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  const double bmag = norm(beta);
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const double hT = mesh.h_elem[static_cast<std::size_t>(e)];
    for (index_t fid : mesh.elem_facets[static_cast<std::size_t>(e)]) {
      const Facet& f = mesh.facets[static_cast<std::size_t>(fid)];
      if (!f.is_interior()) continue;
      const auto& tab = sp.facet_table(fid);
      const index_t* dl = sp.element_dofs(f.left);
      const index_t* dr = sp.element_dofs(f.right);
      const bool own_left = (f.left == e);
      double acc = 0.0;
      for (int q = 0; q < sp.n_facet_qp(); ++q) {
        double jump = 0.0;
        for (int i = 0; i < nl; ++i) {
          double gl = dot(tab.grad[0][static_cast<std::size_t>(q) * nl + i], f.normal);
          double gr = dot(tab.grad[1][static_cast<std::size_t>(q) * nl + i], f.normal);
          jump += v.coeffs[dl[i]] * gl - v.coeffs[dr[i]] * gr;
        }
        Vec2 x = tab.x[static_cast<std::size_t>(q)];
        if (!own_left) x += f.right_shift;
        double phi = weight_value(w, x, t);
        acc += tab.w[static_cast<std::size_t>(q)] * phi * phi * jump * jump;
      }
      total += hT * hT * bmag * acc;
    }
  }
  return total;
}

/// The same quantity as the jump form s0(0; v, phi^2 v): the second slot
/// holds the smooth product z = phi^2 v whose one-sided normal gradients
/// follow the product rule, 2 phi (grad phi . n) v + phi^2 (grad v . n).
/// Continuity of v and of the weight collapses this to the direct facet
/// formula; tests pin the agreement. The route exercises facet values of v
/// and the weight's gradient, so the check has teeth. Facet copies must
/// coincide geometrically: use non-periodic meshes (or weights decayed at
/// the seams).
inline double weighted_s_seminorm_sq_via_s0(const Field& v, Vec2 beta,
                                            const Weight& w, double t) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  const double bmag = norm(beta);
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const double hT = mesh.h_elem[static_cast<std::size_t>(e)];
    for (index_t fid : mesh.elem_facets[static_cast<std::size_t>(e)]) {
      const Facet& f = mesh.facets[static_cast<std::size_t>(fid)];
      if (!f.is_interior()) continue;
      const auto& tab = sp.facet_table(fid);
      const index_t* dl = sp.element_dofs(f.left);
      const index_t* dr = sp.element_dofs(f.right);
      double acc = 0.0;
      for (int q = 0; q < sp.n_facet_qp(); ++q) {
        Vec2 x = tab.x[static_cast<std::size_t>(q)];
        double phi = w.value(x, t);
        double gphi_n = dot(w.gradient(x, t), f.normal);
        double jump_v = 0.0;
        double side_z[2] = {0.0, 0.0};
        for (int i = 0; i < nl; ++i) {
          double cl = v.coeffs[dl[i]];
          double cr = v.coeffs[dr[i]];
          double gl = dot(tab.grad[0][static_cast<std::size_t>(q) * nl + i], f.normal);
          double gr = dot(tab.grad[1][static_cast<std::size_t>(q) * nl + i], f.normal);
          jump_v += cl * gl - cr * gr;
          side_z[0] += phi * phi * cl * gl +
                       2.0 * phi * gphi_n * cl *
                           tab.N[0][static_cast<std::size_t>(q) * nl + i];
          side_z[1] += phi * phi * cr * gr +
                       2.0 * phi * gphi_n * cr *
                           tab.N[1][static_cast<std::size_t>(q) * nl + i];
        }
        acc += tab.w[static_cast<std::size_t>(q)] * jump_v * (side_z[0] - side_z[1]);
      }
      total += hT * hT * bmag * acc;
    }
  }
  return total;
}

/// ||h^{1/2} (dt v + beta . grad v)||_phi^2, optionally over a region.
inline double weighted_residual_bulk_sq(const Field& v, const Field& dt_v, Vec2 beta,
                                        const Weight* w, double t,
                                        const RegionMask* region = nullptr) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    if (region && !region->contains(e)) continue;
    const double hT = mesh.h_elem[static_cast<std::size_t>(e)];
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    double acc = 0.0;
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double dval = 0.0;
      Vec2 g_ref{};
      for (int i = 0; i < nl; ++i) {
        dval += dt_v.coeffs[dofs[i]] * sp.volume_basis(q, i);
        g_ref += v.coeffs[dofs[i]] * sp.volume_basis_ref_grad(q, i);
      }
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double phi = weight_value(w, sp.map_to_physical(e, qp.xi), t);
      double r = dval + dot(beta, sp.physical_gradient(e, g_ref));
      acc += qp.w * detJ * phi * phi * r * r;
    }
    total += hT * acc;
  }
  return total;
}

/// ||v||_{R,phi} = (|phi v|_s^2 + ||h^{1/2}(dt v + beta.grad v)||_phi^2)^{1/2}.
inline double residual_norm(const Field& v, const Field& dt_v, Vec2 beta,
                            const Weight* w, double t) {
  return std::sqrt(weighted_s_seminorm_sq(v, beta, w, t) +
                   weighted_residual_bulk_sq(v, dt_v, beta, w, t));
}

/// The five instantaneous squares the space-time norms integrate. An empty
/// switch vector is read as "switch everywhere zero".
struct InstantNorms {
  double l2_sq = 0.0;       // ||v||_phi^2
  double s_semi_sq = 0.0;   // |phi v|_s^2
  double bulk_sq = 0.0;     // ||h^{1/2}(dt v + beta.grad v)||_phi^2
  double senergy_sq = 0.0;  // ||h^{1/2}|beta|^{1/2} varpi^{1/2} grad v||_phi^2
  double star_sq = 0.0;     // ||h^{-1/2} v||_phi^2

  double triple_S_sq() const { return s_semi_sq + bulk_sq + senergy_sq; }
};

inline InstantNorms instant_norms(const Field& v, const Field& dt_v,
                                  const std::vector<double>& varpi, Vec2 beta,
                                  const Weight* w, double t) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  const double bmag = norm(beta);
  InstantNorms out;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const double hT = mesh.h_elem[static_cast<std::size_t>(e)];
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    double l2 = 0.0, bulk = 0.0, grad2 = 0.0;
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0, dval = 0.0;
      Vec2 g_ref{};
      for (int i = 0; i < nl; ++i) {
        double c = v.coeffs[dofs[i]];
        val += c * sp.volume_basis(q, i);
        dval += dt_v.coeffs[dofs[i]] * sp.volume_basis(q, i);
        g_ref += c * sp.volume_basis_ref_grad(q, i);
      }
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double phi = weight_value(w, sp.map_to_physical(e, qp.xi), t);
      double wq = qp.w * detJ * phi * phi;
      Vec2 g = sp.physical_gradient(e, g_ref);
      double r = dval + dot(beta, g);
      l2 += wq * val * val;
      bulk += wq * r * r;
      grad2 += wq * dot(g, g);
    }
    double vp = varpi.empty() ? 0.0 : varpi[static_cast<std::size_t>(e)];
    out.l2_sq += l2;
    out.bulk_sq += hT * bulk;
    out.senergy_sq += hT * vp * bmag * grad2;
    out.star_sq += l2 / hT;
  }
  out.s_semi_sq = weighted_s_seminorm_sq(v, beta, w, t);
  return out;
}

/// Space-time norms of one trajectory. Time integrals are trapezoidal over
/// the supplied samples; the plain l2 entry is taken at the final sample.
struct NormReport {
  double l2_phi = 0.0;              // ||v(T)||_phi
  double s_seminorm_phi = 0.0;      // (int |phi v|_s^2 dt)^{1/2}
  double residual_norm_phi = 0.0;   // (int ||v||_{R,phi}^2 dt)^{1/2}
  double triple_norm_whS_phi = 0.0; // (int ||v||_{S,phi}^2 dt)^{1/2}
  double triple_norm_wh_phi = 0.0;  // (||v(T)||_phi^2 + int ||v||_{S,phi}^2 dt)^{1/2}
  double star_norm_phi = 0.0;       // (int ||h^{-1/2} v||_phi^2 dt)^{1/2}
  double t_begin = 0.0;
  double t_end = 0.0;
  int n_samples = 0;
};

/// Streams (t, v, dt v, switch) samples during time stepping and trapezoid-
/// accumulates the space-time integrals, so trajectories never need to be
/// stored. Sample times must be non-decreasing.
class NormAccumulator {
 public:
  explicit NormAccumulator(Vec2 beta, const Weight* w = nullptr)
      : beta_(beta), w_(w) {}

  void sample(double t, const Field& v, const Field& dt_v,
              const std::vector<double>& varpi) {
    InstantNorms n = instant_norms(v, dt_v, varpi, beta_, w_, t);
    if (n_ == 0) {
      t_begin_ = t;
    } else {
      require(t >= t_last_, "NormAccumulator: samples must advance in time");
      double half_dt = 0.5 * (t - t_last_);
      int_s_semi_ += half_dt * (prev_.s_semi_sq + n.s_semi_sq);
      int_bulk_ += half_dt * (prev_.bulk_sq + n.bulk_sq);
      int_senergy_ += half_dt * (prev_.senergy_sq + n.senergy_sq);
      int_star_ += half_dt * (prev_.star_sq + n.star_sq);
    }
    prev_ = n;
    t_last_ = t;
    ++n_;
  }

  NormReport report() const {
    require(n_ >= 1, "NormAccumulator: no samples");
    NormReport r;
    r.l2_phi = std::sqrt(prev_.l2_sq);
    r.s_seminorm_phi = std::sqrt(int_s_semi_);
    r.residual_norm_phi = std::sqrt(int_s_semi_ + int_bulk_);
    r.triple_norm_whS_phi = std::sqrt(int_s_semi_ + int_bulk_ + int_senergy_);
    r.triple_norm_wh_phi =
        std::sqrt(prev_.l2_sq + int_s_semi_ + int_bulk_ + int_senergy_);
    r.star_norm_phi = std::sqrt(int_star_);
    r.t_begin = t_begin_;
    r.t_end = t_last_;
    r.n_samples = n_;
    return r;
  }

 private:
  Vec2 beta_;
  const Weight* w_;
  InstantNorms prev_;
  double t_begin_ = 0.0, t_last_ = 0.0;
  double int_s_semi_ = 0.0, int_bulk_ = 0.0, int_senergy_ = 0.0, int_star_ = 0.0;
  int n_ = 0;
};

struct TrajectorySample {
  double t;
  Field v;
  Field dt_v;
  std::vector<double> varpi;
};

inline NormReport triple_norms(const std::vector<TrajectorySample>& trajectory,
                               Vec2 beta, const Weight* w = nullptr) {
  NormAccumulator acc(beta, w);
  for (const auto& s : trajectory) acc.sample(s.t, s.v, s.dt_v, s.varpi);
  return acc.report();
}

/// Elementwise material derivative dt v + beta . grad v as a broken field;
/// one-sided gradients, nodal values per element.
inline DGField broken_material_derivative(const Field& v, const Field& dt_v,
                                          Vec2 beta) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  DGField out{v.space,
              std::vector<double>(static_cast<std::size_t>(mesh.n_elements()) *
                                  static_cast<std::size_t>(nl))};
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const index_t* dofs = sp.element_dofs(e);
    for (int p = 0; p < nl; ++p) {
      Vec2 g_ref{};
      for (int i = 0; i < nl; ++i)
        g_ref += v.coeffs[dofs[i]] * sp.node_basis_ref_grad(p, i);
      out.at(e, p) =
          dt_v.coeffs[dofs[p]] + dot(beta, sp.physical_gradient(e, g_ref));
    }
  }
  return out;
}

/// The discrete test function of the weighted stability diagnostic:
///   pi_h( phi^2 (v + theta h i_av(dt v + beta . grad v)) ),
/// with h the global mesh size and i_av the vertex-averaged recovery of the
/// broken material derivative. theta = 0 reduces to pi_h(phi^2 v).
inline Field stability_test_function(const Field& v, const Field& dt_v, Vec2 beta,
                                     const Weight* w, double t, double theta,
                                     const MassSolver& mass) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  require(theta >= 0.0, "stability_test_function: theta must be non-negative");

  Field recovered{v.space, Vector::Zero(sp.n_dofs())};
  if (theta > 0.0)
    recovered = oswald_average(broken_material_derivative(v, dt_v, beta));
  const double th = theta * mesh.global_h;

  Vector b = Vector::Zero(sp.n_dofs());
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double val = 0.0, rec = 0.0;
      for (int i = 0; i < nl; ++i) {
        val += v.coeffs[dofs[i]] * sp.volume_basis(q, i);
        rec += recovered.coeffs[dofs[i]] * sp.volume_basis(q, i);
      }
      const auto& qp = sp.volume_rule().points[static_cast<std::size_t>(q)];
      double phi = weight_value(w, sp.map_to_physical(e, qp.xi), t);
      double g = phi * phi * (val + th * rec);
      double wq = qp.w * detJ * g;
      for (int i = 0; i < nl; ++i) b[dofs[i]] += wq * sp.volume_basis(q, i);
    }
  }
  return Field{v.space, mass.solve(b)};
}

/// (dt v + beta . grad v, z) over the domain, both discrete.
inline double material_derivative_pairing(const Field& v, const Field& dt_v,
                                          Vec2 beta, const Field& z) {
  const Space& sp = *v.space;
  const Mesh& mesh = sp.mesh();
  const int nl = sp.n_local_dofs();
  double total = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    const double detJ = sp.geometry(e).detJ;
    const index_t* dofs = sp.element_dofs(e);
    for (int q = 0; q < sp.n_volume_qp(); ++q) {
      double dval = 0.0, zval = 0.0;
      Vec2 g_ref{};
      for (int i = 0; i < nl; ++i) {
        dval += dt_v.coeffs[dofs[i]] * sp.volume_basis(q, i);
        zval += z.coeffs[dofs[i]] * sp.volume_basis(q, i);
        g_ref += v.coeffs[dofs[i]] * sp.volume_basis_ref_grad(q, i);
      }
      double r = dval + dot(beta, sp.physical_gradient(e, g_ref));
      total += sp.volume_rule().points[static_cast<std::size_t>(q)].w * detJ * r * zval;
    }
  }
  return total;
}

/// Accumulates both sides of the weighted stability bound along a discrete
/// trajectory:
///   ||v(T)||_phi^2 + C_theta * int ||v||_{S,phi}^2
///     <= ||v(0)||_phi^2 + (C / K^2) * int ||v||_phi^2
///        + 2 * int [ (dt v + beta.grad v, z) + sigma0 s0(y; v, z)
///                    + sigma1 s1(y; v, z) ],
/// where z is the projected weighted test function and y the trajectory's
/// own switch state. The constant C is not tracked analytically:
/// calibrate_constant() returns the smallest C that closes the bound, so a
/// coarse run calibrates and finer runs assert a margin.
class StabilityDiagnostic {
 public:
  StabilityDiagnostic(Vec2 beta, const Weight* w, const StabParams& stab,
                      double theta, const MassSolver& mass)
      : beta_(beta), w_(w), stab_(stab), theta_(theta), mass_(&mass) {
    stab_.validate();
  }

  void sample(double t, const Field& v, const Field& dt_v,
              const std::vector<double>& varpi) {
    InstantNorms n = instant_norms(v, dt_v, varpi, beta_, w_, t);
    Field z = stability_test_function(v, dt_v, beta_, w_, t, theta_, *mass_);
    double pair = material_derivative_pairing(v, dt_v, beta_, z) +
                  stab_.sigma0 * s0_apply(varpi, v, z, beta_) +
                  stab_.sigma1 * s1_apply(varpi, v, z, beta_);
    if (n_ == 0) {
      first_l2_sq_ = n.l2_sq;
    } else {
      require(t >= t_last_, "StabilityDiagnostic: samples must advance in time");
      double half_dt = 0.5 * (t - t_last_);
      int_l2_ += half_dt * (prev_l2_sq_ + n.l2_sq);
      int_triple_ += half_dt * (prev_triple_sq_ + n.triple_S_sq());
      int_pairing_ += half_dt * (prev_pairing_ + pair);
    }
    prev_l2_sq_ = n.l2_sq;
    prev_triple_sq_ = n.triple_S_sq();
    prev_pairing_ = pair;
    last_l2_sq_ = n.l2_sq;
    t_last_ = t;
    ++n_;
  }

  double theta() const { return theta_; }
  /// Default coefficient in front of the dissipation integral.
  double default_c_theta() const { return 0.5 * theta_; }
  /// The closing argument wants the switch diffusion to dominate the
  /// recovery term; outside that regime the bound is reported, not owed.
  bool theta_within_proof_regime() const {
    return std::sqrt(theta_) <= stab_.sigma1;
  }

  double first_l2_sq() const { return first_l2_sq_; }
  double last_l2_sq() const { return last_l2_sq_; }
  double integral_l2_sq() const { return int_l2_; }
  double integral_triple_S_sq() const { return int_triple_; }
  double integral_pairing() const { return int_pairing_; }

  double lhs(double c_theta) const { return last_l2_sq_ + c_theta * int_triple_; }
  double rhs(double C) const {
    double K = w_ ? w_->K() : 1.0;
    return first_l2_sq_ + C / (K * K) * int_l2_ + 2.0 * int_pairing_;
  }
  double margin(double C, double c_theta) const { return rhs(C) - lhs(c_theta); }

  /// Smallest non-negative C with margin(C, c_theta) >= 0.
  double calibrate_constant(double c_theta) const {
    require(n_ >= 2, "StabilityDiagnostic: need at least two samples");
    double deficit = lhs(c_theta) - (first_l2_sq_ + 2.0 * int_pairing_);
    if (deficit <= 0.0 || int_l2_ <= 0.0) return 0.0;
    double K = w_ ? w_->K() : 1.0;
    return K * K * deficit / int_l2_;
  }

 private:
  Vec2 beta_;
  const Weight* w_;
  StabParams stab_;
  double theta_;
  const MassSolver* mass_;
  double first_l2_sq_ = 0.0, last_l2_sq_ = 0.0;
  double prev_l2_sq_ = 0.0, prev_triple_sq_ = 0.0, prev_pairing_ = 0.0;
  double int_l2_ = 0.0, int_triple_ = 0.0, int_pairing_ = 0.0;
  double t_last_ = 0.0;
  int n_ = 0;
};

/// Partition the elements around a vertical shock line: "rough" is every
/// element whose x-extent meets [shock_x - halo, shock_x + halo] (closed on
/// both sides), "smooth" is the rest. Returned as (smooth, rough).
/// Layer-adjusted variants come from peel_boundary_layer on the smooth mask
/// and complement() of the result.
inline std::pair<RegionMask, RegionMask> region_split_shock(const Mesh& mesh,
                                                            double shock_x,
                                                            double halo) {
  require(halo >= 0.0, "region_split_shock: halo must be non-negative");
  RegionMask rough;
  rough.in.assign(static_cast<std::size_t>(mesh.n_elements()), 0);
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    auto c = mesh.triangle_coords(e);
    double xmin = std::min({c[0].x, c[1].x, c[2].x});
    double xmax = std::max({c[0].x, c[1].x, c[2].x});
    if (xmax >= shock_x - halo && xmin <= shock_x + halo)
      rough.in[static_cast<std::size_t>(e)] = 1;
  }
  rough.provenance = "band |x - " + std::to_string(shock_x) +
                     "| <= " + std::to_string(halo);
  RegionMask smooth = rough.complement();
  smooth.provenance = "complement of " + rough.provenance;
  return {std::move(smooth), std::move(rough)};
}

}  // namespace cipad
