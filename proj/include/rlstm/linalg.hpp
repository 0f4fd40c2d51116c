#pragma once

#include <Eigen/Dense>

namespace rlstm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SingularPair {
  double value = 0.0;  // largest singular value
  Vector left;         // u1, unit
  Vector right;        // v1, unit
};

// Largest singular value of m, by power iteration on mᵀm. Deterministic:
// the start vector is all-ones (normalized), re-seeded with a fixed
// perturbation if it is orthogonal to the dominant direction. Relative
// tolerance 1e-10, at most 10000 iterations; throws on non-convergence.
double induced_2norm(const Matrix& m);

// As induced_2norm, but also returns the dominant singular pair (u1, v1)
// with uᵀ m v = value, used for d‖m‖₂/dm = u1 v1ᵀ.
SingularPair dominant_singular(const Matrix& m);

// Warm-started variant for call sites that evaluate slowly-moving matrices
// repeatedly (norm-penalty descent): when *warm holds a usable direction the
// iteration starts there, and the converged direction is written back.
SingularPair dominant_singular(const Matrix& m, Vector* warm);

// Numerically stable logistic function (branches on sign).
double stable_sigmoid(double w);

}  // namespace rlstm
