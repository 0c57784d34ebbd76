#pragma once

/// @file linalg.hpp
/// Mass-matrix solver: Jacobi-preconditioned conjugate gradients at a fixed
/// relative tolerance. Mass matrices here are SPD with mesh-independent
/// conditioning, so CG converges in a few dozen iterations; warm starts from
/// the previous time level cut that further inside time loops.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "cipad/space.hpp"
#include "cipad/types.hpp"

namespace cipad {

class MassSolver {
 public:
  explicit MassSolver(SparseMatrix M, double rel_tol = 1e-12)
      : M_(std::move(M)) {
    cg_.setTolerance(rel_tol);
    cg_.compute(M_);
    require(cg_.info() == Eigen::Success, "MassSolver: factorization setup failed");
  }

  const SparseMatrix& matrix() const { return M_; }

  Vector solve(const Vector& b) const {
    require(b.size() == M_.rows(), "MassSolver: right-hand side size mismatch");
    if (b.norm() == 0.0) return Vector::Zero(b.size());
    Vector x = cg_.solve(b);
    require(cg_.info() == Eigen::Success, "MassSolver: CG did not converge");
    return x;
  }

  Vector solve(const Vector& b, const Vector& guess) const {
    if (b.norm() == 0.0) return Vector::Zero(b.size());
    Vector x = cg_.solveWithGuess(b, guess);
    require(cg_.info() == Eigen::Success, "MassSolver: CG did not converge");
    return x;
  }

 private:
  SparseMatrix M_;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg_;
};

}  // namespace cipad
