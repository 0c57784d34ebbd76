#pragma once

/// @file quadrature.hpp
/// Gauss-Legendre rules on [0,1] and collapsed tensor-product rules on the
/// reference triangle {(x,y): x,y >= 0, x+y <= 1}.
///
/// The triangle rule maps a tensor Gauss grid through (x,y) = (s(1-t), t) and
/// folds the Jacobian (1-t) into the weights. An n x n grid therefore
/// integrates total degree 2n-2 exactly (the substitution raises the t-degree
/// by one). Point counts stay small for the degrees used here (<= 8).

#include <cmath>
#include <vector>

#include "cipad/types.hpp"

namespace cipad {

struct QuadPoint1D {
  double x;
  double w;
};

/// Gauss-Legendre rule with n points on [0,1]; exact for degree 2n-1.
/// Nodes found by Newton iteration on P_n with the usual Chebyshev initial
/// guess; converges to machine precision in a handful of steps.
inline std::vector<QuadPoint1D> gauss_legendre_01(int n) {
  require(n >= 1 && n <= 30, "gauss_legendre_01: order out of range");
  std::vector<QuadPoint1D> pts(n);
  for (int i = 0; i < n; ++i) {
    // Root of P_n on [-1,1].
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_n and P_n' by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = (n == 1) ? p1 : p1;
      double dpn = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = pn / dpn;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // Recompute derivative at the converged node for the weight.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dpn = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dpn * dpn);
    pts[i] = {0.5 * (x + 1.0), 0.5 * w};
  }
  return pts;
}

struct TriQuadPoint {
  Vec2 xi;   // reference coordinates, xi.x + xi.y <= 1
  double w;  // weight; sums to reference area 1/2
};

struct TriangleRule {
  int exact_degree = 0;
  std::vector<TriQuadPoint> points;
};

/// Rule exact for all polynomials of total degree <= `degree`.
inline TriangleRule make_triangle_rule(int degree) {
  require(degree >= 0, "make_triangle_rule: negative degree");
  int n = (degree + 2 + 1) / 2;  // 2n-2 >= degree
  auto g = gauss_legendre_01(n);
  TriangleRule rule;
  rule.exact_degree = 2 * n - 2;
  rule.points.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& s : g)
    for (const auto& t : g)
      rule.points.push_back({{s.x * (1.0 - t.x), t.x}, s.w * t.w * (1.0 - t.x)});
  return rule;
}

struct SegmentRule {
  int exact_degree = 0;
  std::vector<QuadPoint1D> points;  // parameter on [0,1]; weights sum to 1
};

/// Gauss rule on a parameterised segment, exact for degree <= `degree`.
inline SegmentRule make_segment_rule(int degree) {
  require(degree >= 0, "make_segment_rule: negative degree");
  int n = degree / 2 + 1;
  return {2 * n - 1, gauss_legendre_01(n)};
}

}  // namespace cipad
