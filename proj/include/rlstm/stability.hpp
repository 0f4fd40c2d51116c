#pragma once

#include <utility>
#include <vector>

#include "rlstm/invariant_set.hpp"
#include "rlstm/lstm.hpp"

namespace rlstm {

enum class CertKind { delta_iss, iss };

// Nonnegative 2x2 contraction-test matrix of one layer at index k. For the
// delta-ISS variant a12 is alpha_s(k); the ISS variant replaces it by
// sigma_i(k) ||U_c||.
struct CertMatrix {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
  CertKind kind = CertKind::delta_iss;
  double alpha_s = 0.0;

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a21; }
};

struct GainVectors {
  Eigen::Vector2d a_x{0.0, 0.0};
  double alpha_x = 0.0;
  // ISS bias gain; zero except on the last layer of the ISS variant.
  Eigen::Vector2d a_b{0.0, 0.0};
};

// Real Schur data of a CertMatrix: A = Q [[lambda1, nu], [0, lambda2]] Qᵀ
// with |lambda1| >= |lambda2| and r = |lambda2| / |lambda1| (0 when
// lambda1 = 0).
struct SchurFactors {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu = 0.0;
  double r = 0.0;
};

struct LayerCertificate {
  CertMatrix matrix;
  double rho = 0.0;
  GainVectors gains;
  SchurFactors schur;
  double s_bar = 0.0;       // ||(c_bar(k), tanh(c_bar(k)) sigma_o(k))||_2
  Eigen::Index n_c = 0;
};

struct Certificate {
  int k = 0;
  std::vector<LayerCertificate> layers;
  bool verdict = false;  // rho < 1 on every layer
  double u_y_norm = 0.0;
};

// Dominant eigenvalue of a nonnegative 2x2 matrix via the quadratic
// formula; the discriminant (a11-a22)^2 + 4 a12 a21 is nonnegative by
// construction. Throws on negative entries.
double spectral_radius_2x2(const CertMatrix& a);

SchurFactors schur_2x2(const CertMatrix& a);

// Growth factor with ||A^t||_2 <= mu(t) * rho(A)^t. Handles the r -> 1
// limit ((1-r^t)/(1-r) -> t) and the lambda1 = 0 nilpotent case.
double mu(const SchurFactors& factors, long t);

std::pair<CertMatrix, GainVectors> delta_iss_matrix(const LstmParams& params,
                                                    const GammaSequences& seq,
                                                    int layer, int k);

std::pair<CertMatrix, GainVectors> iss_matrix(const LstmParams& params,
                                              const GammaSequences& seq,
                                              int layer, int k);

// Decay envelope for the top-layer state difference given per-layer initial
// difference norms. For L = 1 this is mu(t) rho^t s.
double beta_tilde(const std::vector<double>& s_norms, long t,
                  const Certificate& cert);

Certificate certify(const LstmParams& params, int k);

}  // namespace rlstm
