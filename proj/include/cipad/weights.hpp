#pragma once

/// @file weights.hpp
/// Transported localisation weight. The radial profile is 1 inside a
/// plateau of radius r0 and decays like exp(-(r - r0)/sigma) outside, with
/// sigma = K sqrt(h); a polynomial ramp makes the junction C^{k+1}. The
/// space-time weight rides with the flow:
///   phi(x, t) = profile(|x - beta t - x0|),
/// so its material derivative vanishes identically and all its spatial
/// decay travels with the advected solution features.

#include <cmath>

#include "cipad/mesh.hpp"
#include "cipad/types.hpp"

namespace cipad {

/// Polynomial step: S(0) = 0, S(1) = 1 with the first `order` derivatives
/// vanishing at both ends (degree 2*order + 1).
inline double smooth_step(int order, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  switch (order) {
    case 1: return u * u * (3.0 - 2.0 * u);
    case 2: return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    case 3: return u * u * u * u * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
    default: fail("smooth_step: order must be 1, 2, or 3");
  }
}

/// Antiderivative of smooth_step on [0,1]: I(0) = 0, I(1) = 1/2.
inline double smooth_step_integral(int order, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return u - 0.5;
  double u2 = u * u;
  switch (order) {
    case 1: return u2 * u * (1.0 - 0.5 * u);
    case 2: return u2 * u2 * (2.5 + u * (-3.0 + u));
    case 3: return u2 * u2 * u * (7.0 + u * (-14.0 + u * (10.0 - 2.5 * u)));
    default: fail("smooth_step_integral: order must be 1, 2, or 3");
  }
}

struct WeightSpec {
  Vec2 x0;             // plateau centre at t = 0
  double r0 = 0.0;     // plateau radius
  double K = 2.0;      // decay parameter, > 1
  double blend = 0.0;  // ramp width; 0 means "use sigma"
};

/// The weight bound to a mesh scale: sigma = K sqrt(h) and a ramp of
/// smoothness order matching the polynomial degree.
class Weight {
 public:
  Weight(const WeightSpec& spec, Vec2 beta, double h, int degree)
      : x0_(spec.x0),
        beta_(beta),
        r0_(spec.r0),
        K_(spec.K),
        sigma_(spec.K * std::sqrt(h)),
        b_(spec.blend > 0.0 ? spec.blend : sigma_),
        order_(degree) {
    require(spec.K > 1.0, "Weight: decay parameter K must exceed 1");
    require(spec.r0 >= 0.0, "Weight: plateau radius must be non-negative");
    require(h > 0.0, "Weight: mesh size must be positive");
    require(degree >= 1 && degree <= 3, "Weight: degree must be 1, 2, or 3");
  }

  double sigma() const { return sigma_; }
  double K() const { return K_; }
  double r0() const { return r0_; }
  double blend() const { return b_; }
  Vec2 centre(double t) const { return x0_ + t * beta_; }

  /// Ramp: psi(0) = 0 with order+1 vanishing derivatives, psi(s) = s - b/2
  /// beyond the blend width, psi' in [0,1] everywhere.
  double psi(double s) const {
    if (s <= 0.0) return 0.0;
    if (s >= b_) return s - 0.5 * b_;
    return b_ * smooth_step_integral(order_, s / b_);
  }
  double dpsi(double s) const {
    if (s <= 0.0) return 0.0;
    return smooth_step(order_, s / b_);
  }

  double profile(double r) const {
    if (r <= r0_) return 1.0;
    return std::exp(-psi(r - r0_) / sigma_);
  }
  /// d/dr of the profile; |dprofile| <= profile / sigma since psi' <= 1.
  double dprofile(double r) const {
    if (r <= r0_) return 0.0;
    return -dpsi(r - r0_) / sigma_ * profile(r);
  }

  double value(Vec2 x, double t) const {
    return profile(radius(x, t));
  }

  Vec2 gradient(Vec2 x, double t) const {
    Vec2 d = x - centre(t);
    double r = norm(d);
    if (r <= r0_ || r == 0.0) return Vec2{0.0, 0.0};
    return (dprofile(r) / r) * d;
  }

  /// Partial time derivative, derived independently of gradient():
  /// dr/dt = -beta . (x - centre)/r for the moving-centre radius.
  double time_derivative(Vec2 x, double t) const {
    Vec2 d = x - centre(t);
    double r = norm(d);
    if (r <= r0_ || r == 0.0) return 0.0;
    double dr_dt = -dot(beta_, d) / r;
    return dprofile(r) * dr_dt;
  }

  /// Material derivative along beta; zero by the transported construction
  /// (tests assert the two independent paths above cancel).
  double material_derivative(Vec2 x, double t) const {
    return time_derivative(x, t) + dot(beta_, gradient(x, t));
  }

 private:
  double radius(Vec2 x, double t) const { return norm(x - centre(t)); }

  Vec2 x0_;
  Vec2 beta_;
  double r0_;
  double K_;
  double sigma_;
  double b_;
  int order_;
};

struct WeightEval {
  double phi;
  Vec2 grad;
  double material;  // identically zero for the transported weight
};

inline WeightEval weight_eval(const Weight& w, Vec2 x, double t) {
  return WeightEval{w.value(x, t), w.gradient(x, t), 0.0};
}

/// Largest weight value sampled over a region's elements (corners and edge
/// midpoints). Shock experiments compare this against their decay budget to
/// reject configurations whose weight has not died off on the rough region.
inline double max_weight_on_region(const Mesh& mesh, const Weight& w, double t,
                                   const RegionMask& region) {
  double m = 0.0;
  for (index_t e = 0; e < mesh.n_elements(); ++e) {
    if (!region.contains(e)) continue;
    auto c = mesh.triangle_coords(e);
    for (int v = 0; v < 3; ++v) {
      m = std::max(m, w.value(c[static_cast<std::size_t>(v)], t));
      // Edge midpoints catch a plateau grazing an element between vertices.
      Vec2 mid = 0.5 * (c[static_cast<std::size_t>(v)] +
                        c[static_cast<std::size_t>((v + 1) % 3)]);
      m = std::max(m, w.value(mid, t));
    }
  }
  return m;
}

}  // namespace cipad
