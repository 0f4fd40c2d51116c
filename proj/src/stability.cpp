#include "rlstm/stability.hpp"

#include <cmath>
#include <stdexcept>

namespace rlstm {

namespace {

void check_nonnegative(const CertMatrix& a, const char* where) {
  if (a.a11 < 0 || a.a12 < 0 || a.a21 < 0 || a.a22 < 0) {
    throw std::invalid_argument(std::string(where) +
                                ": certification matrix has negative entries");
  }
}

double binom_multiplicative(long t, int m) {
  double c = 1.0;
  for (int j = 1; j <= m; ++j) {
    c *= static_cast<double>(t + j) / static_cast<double>(j);
  }
  return c;
}

double log_binom(long t, int m) {
  double log_c = 0.0;
  for (int j = 1; j <= m; ++j) {
    log_c += std::log(static_cast<double>(t + j)) - std::log(static_cast<double>(j));
  }
  return log_c;
}

}  // namespace

double spectral_radius_2x2(const CertMatrix& a) {
  check_nonnegative(a, "spectral_radius_2x2");
  const double tr = a.trace();
  const double disc = (a.a11 - a.a22) * (a.a11 - a.a22) + 4.0 * a.a12 * a.a21;
  return 0.5 * (tr + std::sqrt(disc));
}

SchurFactors schur_2x2(const CertMatrix& a) {
  check_nonnegative(a, "schur_2x2");
  const double tr = a.trace();
  const double disc = (a.a11 - a.a22) * (a.a11 - a.a22) + 4.0 * a.a12 * a.a21;
  const double root = std::sqrt(disc);

  SchurFactors f;
  f.lambda1 = 0.5 * (tr + root);
  f.lambda2 = 0.5 * (tr - root);

  // Unit eigenvector of lambda1 from the better-conditioned row of A - I*l1.
  Eigen::Vector2d v1(a.a12, f.lambda1 - a.a11);
  Eigen::Vector2d v2(f.lambda1 - a.a22, a.a21);
  Eigen::Vector2d q1 = (v1.norm() >= v2.norm()) ? v1 : v2;
  if (q1.norm() == 0.0) {
    q1 = Eigen::Vector2d(1.0, 0.0);  // A is lambda1 * I
  }
  q1.normalize();
  const Eigen::Vector2d q2(-q1.y(), q1.x());

  Eigen::Matrix2d m;
  m << a.a11, a.a12, a.a21, a.a22;
  f.nu = q1.dot(m * q2);
  f.r = (f.lambda1 == 0.0) ? 0.0 : std::abs(f.lambda2) / std::abs(f.lambda1);
  return f;
}

double mu(const SchurFactors& factors, long t) {
  if (t < 0) throw std::invalid_argument("mu: negative time index");
  if (factors.lambda1 == 0.0) {
    // Nilpotent case: A^t vanishes for t >= 2 and rho^t already carries the
    // decay, so the growth factor collapses.
    return 1.0;
  }
  const double r = factors.r;
  const double r_t = std::pow(r, static_cast<double>(t));
  double geometric;  // (1 - r^t) / (1 - r), with the r -> 1 limit t
  if (std::abs(1.0 - r) < 1e-12) {
    geometric = static_cast<double>(t);
  } else {
    geometric = (1.0 - r_t) / (1.0 - r);
  }
  const double ratio = factors.nu / factors.lambda1;
  return std::sqrt(1.0 + r_t * r_t + ratio * ratio * geometric * geometric);
}

std::pair<CertMatrix, GainVectors> delta_iss_matrix(const LstmParams& params,
                                                    const GammaSequences& seq,
                                                    int layer, int k) {
  if (layer < 0 || layer >= static_cast<int>(seq.layers.size())) {
    throw std::invalid_argument("delta_iss_matrix: layer index out of range");
  }
  if (k < 0 || k > seq.k_max) throw std::invalid_argument("delta_iss_matrix: k out of range");
  const auto& s = seq.layers[layer];
  const auto& p = params.layers[layer];
  const double sf = s.sigma_f[k];
  const double si = s.sigma_i[k];
  const double so = s.sigma_o[k];
  const double pc = s.phi_c[k];
  const double cb = s.c_bar[k];
  const double phi_cb = std::tanh(cb);

  CertMatrix a;
  a.kind = CertKind::delta_iss;
  a.alpha_s = 0.25 * induced_2norm(p.U_f) * cb + si * induced_2norm(p.U_c) +
              0.25 * induced_2norm(p.U_i) * pc;
  a.a11 = sf;
  a.a12 = a.alpha_s;
  a.a21 = so * sf;
  a.a22 = a.alpha_s * so + 0.25 * phi_cb * induced_2norm(p.U_o);

  GainVectors g;
  g.alpha_x = 0.25 * induced_2norm(p.W_f) * cb + si * induced_2norm(p.W_c) +
              0.25 * induced_2norm(p.W_i) * pc;
  g.a_x << g.alpha_x, g.alpha_x * so + 0.25 * phi_cb * induced_2norm(p.W_o);
  return {a, g};
}

std::pair<CertMatrix, GainVectors> iss_matrix(const LstmParams& params,
                                              const GammaSequences& seq,
                                              int layer, int k) {
  if (layer < 0 || layer >= static_cast<int>(seq.layers.size())) {
    throw std::invalid_argument("iss_matrix: layer index out of range");
  }
  if (k < 0 || k > seq.k_max) throw std::invalid_argument("iss_matrix: k out of range");
  const auto& s = seq.layers[layer];
  const auto& p = params.layers[layer];
  const double sf = s.sigma_f[k];
  const double si = s.sigma_i[k];
  const double so = s.sigma_o[k];
  const double u_c = induced_2norm(p.U_c);
  const double w_c = induced_2norm(p.W_c);

  CertMatrix a;
  a.kind = CertKind::iss;
  a.a11 = sf;
  a.a12 = si * u_c;
  a.a21 = so * sf;
  a.a22 = so * si * u_c;

  GainVectors g;
  g.alpha_x = si * w_c;
  g.a_x << si * w_c, so * si * w_c;
  if (layer + 1 == static_cast<int>(seq.layers.size())) {
    g.a_b << si, so * si;
  }
  return {a, g};
}

double beta_tilde(const std::vector<double>& s_norms, long t,
                  const Certificate& cert) {
  const int n_layers = static_cast<int>(cert.layers.size());
  if (static_cast<int>(s_norms.size()) != n_layers) {
    throw std::invalid_argument("beta_tilde: s_norms size does not match layers");
  }
  if (t < 0) throw std::invalid_argument("beta_tilde: negative time index");

  const auto& top = cert.layers.back();
  double total = 0.0;
  if (s_norms.back() != 0.0) {
    total = mu(top.schur, t) * std::pow(top.rho, static_cast<double>(t)) *
            s_norms.back();
  }

  for (int l = 0; l < n_layers - 1; ++l) {
    const double s = s_norms[l];
    if (s == 0.0) continue;
    const int m = n_layers - 1 - l;  // L - l with 1-based layer numbering
    double mu_chain = 1.0;
    double max_rho = 0.0;
    for (int i = l; i < n_layers; ++i) {
      mu_chain *= mu(cert.layers[i].schur, t);
      max_rho = std::max(max_rho, cert.layers[i].rho);
    }
    double gain_prod = 1.0;
    for (int i = l + 1; i < n_layers; ++i) {
      gain_prod *= cert.layers[i].gains.a_x.norm();
    }
    const double binom = binom_multiplicative(t, m);
    double term = mu_chain * binom * std::pow(max_rho, static_cast<double>(t)) *
                  gain_prod * s;
    if (!std::isfinite(term)) {
      // Redo in log space; only reachable for huge t where the binomial or
      // the power overflows on its own.
      if (max_rho == 0.0 && t > 0) {
        term = 0.0;
      } else {
        const double log_term = std::log(mu_chain) + log_binom(t, m) +
                                static_cast<double>(t) * std::log(max_rho) +
                                std::log(gain_prod) + std::log(s);
        term = std::exp(log_term);
      }
    }
    total += term;
  }
  return total;
}

Certificate certify(const LstmParams& params, int k) {
  params.validate();
  if (k < 0) throw std::invalid_argument("certify: k < 0");
  const GammaSequences seq = compute_sequences(params, k);

  Certificate cert;
  cert.k = k;
  cert.u_y_norm = induced_2norm(params.U_y);
  cert.verdict = true;
  for (int l = 0; l < static_cast<int>(params.layers.size()); ++l) {
    auto [matrix, gains] = delta_iss_matrix(params, seq, l, k);
    LayerCertificate layer;
    layer.matrix = matrix;
    layer.gains = gains;
    layer.rho = spectral_radius_2x2(matrix);
    layer.schur = schur_2x2(matrix);
    const auto& s = seq.layers[l];
    layer.s_bar = std::hypot(s.c_bar[k], std::tanh(s.c_bar[k]) * s.sigma_o[k]);
    layer.n_c = params.layers[l].cell_size();
    cert.verdict = cert.verdict && layer.rho < 1.0;
    cert.layers.push_back(layer);
  }
  return cert;
}

}  // namespace rlstm
