#pragma once

/// @file reference.hpp
/// Lagrange reference elements of degree 1..3 on the unit triangle with
/// vertices (0,0), (1,0), (0,1).
///
/// Node layout: 3 vertex nodes first, then k-1 nodes per edge (edge e is the
/// edge opposite local vertex e, traversed from local vertex (e+1)%3 to
/// (e+2)%3), then interior lattice nodes. Basis coefficients are obtained by
/// inverting the monomial Vandermonde matrix at the nodes; for degree <= 3
/// this is well conditioned.

#include <Eigen/Dense>
#include <vector>

#include "cipad/types.hpp"

namespace cipad {

class ReferenceElement {
 public:
  explicit ReferenceElement(int degree) : degree_(degree) {
    require(degree >= 1 && degree <= 3, "ReferenceElement: degree must be 1..3");
    build_nodes();
    build_monomials();
    build_coefficients();
  }

  int degree() const { return degree_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_edge_nodes() const { return degree_ - 1; }
  int n_interior_nodes() const { return (degree_ - 1) * (degree_ - 2) / 2; }
  const std::vector<Vec2>& nodes() const { return nodes_; }

  /// Index of the p-th node on edge e (p counted from local vertex (e+1)%3).
  int edge_node(int e, int p) const { return 3 + e * n_edge_nodes() + p; }
  int interior_node(int p) const { return 3 + 3 * n_edge_nodes() + p; }

  /// Basis values and reference gradients at a reference point.
  void eval(const Vec2& xi, std::vector<double>& values,
            std::vector<Vec2>& gradients) const {
    const int n = n_nodes();
    values.assign(static_cast<std::size_t>(n), 0.0);
    gradients.assign(static_cast<std::size_t>(n), Vec2{});
    for (int m = 0; m < n; ++m) {
      auto [a, b] = monomials_[static_cast<std::size_t>(m)];
      double xa = ipow(xi.x, a), yb = ipow(xi.y, b);
      double mono = xa * yb;
      double dmx = (a == 0) ? 0.0 : a * ipow(xi.x, a - 1) * yb;
      double dmy = (b == 0) ? 0.0 : b * xa * ipow(xi.y, b - 1);
      for (int i = 0; i < n; ++i) {
        double c = coeff_(i, m);
        values[static_cast<std::size_t>(i)] += c * mono;
        gradients[static_cast<std::size_t>(i)].x += c * dmx;
        gradients[static_cast<std::size_t>(i)].y += c * dmy;
      }
    }
  }

 private:
  static double ipow(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
  }

  void build_nodes() {
    const int k = degree_;
    nodes_ = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    for (int e = 0; e < 3; ++e) {
      Vec2 a = nodes_[static_cast<std::size_t>((e + 1) % 3)];
      Vec2 b = nodes_[static_cast<std::size_t>((e + 2) % 3)];
      for (int p = 1; p < k; ++p)
        nodes_.push_back(a + (b - a) * (static_cast<double>(p) / k));
    }
    for (int i = 1; i < k; ++i)
      for (int j = 1; i + j < k; ++j)
        nodes_.push_back({static_cast<double>(i) / k, static_cast<double>(j) / k});
  }

  void build_monomials() {
    for (int total = 0; total <= degree_; ++total)
      for (int a = total; a >= 0; --a) monomials_.push_back({a, total - a});
  }

  void build_coefficients() {
    const int n = n_nodes();
    Eigen::MatrixXd V(n, n);
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m) {
        auto [a, b] = monomials_[static_cast<std::size_t>(m)];
        V(i, m) = ipow(nodes_[static_cast<std::size_t>(i)].x, a) *
                  ipow(nodes_[static_cast<std::size_t>(i)].y, b);
      }
    coeff_ = V.fullPivLu().inverse().transpose();
  }

  int degree_;
  std::vector<Vec2> nodes_;
  std::vector<std::pair<int, int>> monomials_;
  Eigen::MatrixXd coeff_;  // coeff_(i,m): weight of monomial m in basis i
};

inline const ReferenceElement& reference_element(int degree) {
  static const ReferenceElement p1(1), p2(2), p3(3);
  switch (degree) {
    case 1: return p1;
    case 2: return p2;
    case 3: return p3;
    default: require(false, "reference_element: degree must be 1..3");
  }
  fail("unreachable");
}

}  // namespace cipad
