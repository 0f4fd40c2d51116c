#include "rlstm/linalg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlstm {

namespace {

constexpr double kRelTol = 1e-10;
constexpr int kMaxIter = 10000;

struct PowerResult {
  double sigma = 0.0;
  Vector v;
  bool converged = true;
  double residual = 0.0;
};

// Power iteration for the dominant eigenpair of mᵀm, started from v0.
// Convergence is judged on the eigen-residual, not on Rayleigh-quotient
// stagnation, so nearly repeated singular values still yield an accurate
// dominant direction (needed by the u1 v1ᵀ gradient).
PowerResult power_iterate(const Matrix& m, Vector v0) {
  PowerResult out;
  v0.normalize();
  Vector v = std::move(v0);
  Vector projected(m.rows());
  Vector image(m.cols());
  double sigma_sq = 0.0;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    projected.noalias() = m * v;
    image.noalias() = m.transpose() * projected;
    const double norm = image.norm();
    if (norm == 0.0) {
      // v is in the null space; for a nonzero m restart handles this.
      out.sigma = 0.0;
      out.v = v;
      return out;
    }
    v = image / norm;
    projected.noalias() = m * v;
    image.noalias() = m.transpose() * projected;
    sigma_sq = v.dot(image);
    out.residual = (image - sigma_sq * v).norm();
    // Tiered acceptance: full precision when the spectrum cooperates, a
    // looser residual once a nearly-tied dominant pair has clearly capped
    // the attainable rate (the value error stays below the tie width).
    const double scale = std::max(sigma_sq, 1e-300);
    if (out.residual <= kRelTol * scale ||
        (iter >= 100 && out.residual <= 1e-4 * scale) ||
        (iter >= 2000 && out.residual <= 1e-6 * scale)) {
      out.sigma = std::sqrt(sigma_sq);
      out.v = v;
      return out;
    }
  }
  out.sigma = std::sqrt(sigma_sq);
  out.v = v;
  // A residual of r relative to sigma^2 after the full budget means the top
  // two singular values are within ~2r of each other; any direction inside
  // that nearly-tied subspace is a valid (sub)gradient direction and the
  // value error is below the tie width. Norm-penalty descent steers matrices
  // into exactly this regime, so it is accepted rather than fatal.
  out.converged = out.residual <= 1e-3 * std::max(sigma_sq, 1e-300);
  return out;
}

}  // namespace

SingularPair dominant_singular(const Matrix& m) { return dominant_singular(m, nullptr); }

SingularPair dominant_singular(const Matrix& m, Vector* warm) {
  if (!m.allFinite()) throw std::invalid_argument("induced_2norm: non-finite entries");
  SingularPair pair;
  pair.left = Vector::Zero(m.rows());
  pair.right = Vector::Zero(m.cols());
  if (m.rows() == 0 || m.cols() == 0) return pair;
  if (m.isZero(0.0)) {
    pair.left(0) = 1.0;
    pair.right(0) = 1.0;
    return pair;
  }

  const bool warm_started =
      warm != nullptr && warm->size() == m.cols() && warm->norm() > 0.0;
  PowerResult a = power_iterate(
      m, warm_started ? *warm : Vector(Vector::Ones(m.cols())));
  PowerResult best = a;
  // A cold start adds a second deterministic start (a ramp) in case the
  // first one is (numerically) orthogonal to the dominant direction; a warm
  // start already tracks the dominant subspace.
  if (!warm_started || !a.converged) {
    Vector ramp(m.cols());
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      ramp(i) = 1.0 + 0.5 * static_cast<double>(i + 1) / static_cast<double>(m.cols());
    }
    PowerResult b = power_iterate(m, ramp);
    if (b.sigma > best.sigma * (1.0 + 1e-12)) best = std::move(b);
  }
  if (!best.converged) {
    std::ostringstream msg;
    msg << "induced_2norm: power iteration did not converge after " << kMaxIter
        << " iterations; last estimate " << best.sigma << ", residual "
        << best.residual;
    throw std::runtime_error(msg.str());
  }

  pair.right = best.v;
  Vector image = m * best.v;
  pair.value = image.norm();
  if (pair.value > 0.0) {
    pair.left = image / pair.value;
  } else {
    pair.left(0) = 1.0;
  }
  if (warm != nullptr) *warm = pair.right;
  return pair;
}

double induced_2norm(const Matrix& m) { return dominant_singular(m).value; }

double stable_sigmoid(double w) {
  if (w >= 0.0) {
    return 1.0 / (1.0 + std::exp(-w));
  }
  const double e = std::exp(w);
  return e / (1.0 + e);
}

}  // namespace rlstm
