#pragma once

// Independent reference implementations used only by tests. Each one is
// deliberately written along a different route than the library code it
// checks (explicit loops, O(T^2) scans, Jacobi rotations, quadrature-free
// closed forms) so agreement is meaningful.

#include <cmath>
#include <functional>
#include <vector>

#include "rlstm/lstm.hpp"
#include "rlstm/rng.hpp"

namespace oracles {

using rlstm::Matrix;
using rlstm::Vector;

// Scalar single-layer LSTM step evaluated with plain arithmetic.
struct ScalarStep {
  double c_next, h_next, y;
};

inline ScalarStep scalar_lstm_step(double w_f, double w_i, double w_c, double w_o,
                                   double u_f, double u_i, double u_c, double u_o,
                                   double b_f, double b_i, double b_c, double b_o,
                                   double u_y, double b_y, double c, double h,
                                   double x) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double f = sig(w_f * x + u_f * h + b_f);
  const double i = sig(w_i * x + u_i * h + b_i);
  const double g = std::tanh(w_c * x + u_c * h + b_c);
  const double o = sig(w_o * x + u_o * h + b_o);
  ScalarStep out;
  out.c_next = f * c + i * g;
  out.h_next = o * std::tanh(out.c_next);
  out.y = u_y * out.h_next + b_y;
  return out;
}

// Row-sum bound evaluated with explicit loops over entries.
inline double g_gate_bruteforce(const Matrix& w, const Matrix& u, const Vector& b,
                                double eta, double x_max, bool abs_bias,
                                bool clamp) {
  double best = clamp ? 0.0 : -1e300;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index cidx = 0; cidx < w.cols(); ++cidx) {
      acc += x_max * std::abs(w(r, cidx));
    }
    for (Eigen::Index cidx = 0; cidx < u.cols(); ++cidx) {
      acc += eta * std::abs(u(r, cidx));
    }
    acc += abs_bias ? std::abs(b(r)) : b(r);
    if (clamp && acc < 0.0) acc = 0.0;
    if (acc > best) best = acc;
  }
  return clamp ? std::max(best, 0.0) : best;
}

// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_largest_eigenvalue(Matrix a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-26) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cos_r = 1.0 / std::sqrt(t * t + 1.0);
        const double sin_r = t * cos_r;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cos_r * akp - sin_r * akq;
          a(k, q) = sin_r * akp + cos_r * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cos_r * apk - sin_r * aqk;
          a(q, k) = sin_r * apk + cos_r * aqk;
        }
      }
    }
  }
  double largest = a(0, 0);
  for (Eigen::Index k = 1; k < n; ++k) largest = std::max(largest, a(k, k));
  return largest;
}

inline double induced_2norm_jacobi(const Matrix& m) {
  const double lambda = jacobi_largest_eigenvalue(m.transpose() * m);
  return std::sqrt(std::max(lambda, 0.0));
}

// Dominant eigenvalue of a nonnegative 2x2 matrix by plain power iteration.
inline double power_iteration_2x2(const Eigen::Matrix2d& a, int iters = 20000) {
  Eigen::Vector2d v(1.0, 1.0);
  v.normalize();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Eigen::Vector2d w = a * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    w /= n;
    lambda = w.dot(a * w);
    v = w;
  }
  return std::abs(lambda);
}

// Exact 2-norm of a 2x2 matrix from the Frobenius norm and determinant.
inline double exact_2norm_2x2(const Eigen::Matrix2d& a) {
  const double fro2 = a.squaredNorm();
  const double det = a.determinant();
  const double inner = std::max(fro2 * fro2 - 4.0 * det * det, 0.0);
  return std::sqrt(0.5 * (fro2 + std::sqrt(inner)));
}

// Recovery time by the O(T^2) definition scan: for each candidate t >= t0,
// check every later sample.
inline long recovery_forward_scan(const std::vector<double>& deviation, long t0,
                                  double e, bool* recovered) {
  const long n = static_cast<long>(deviation.size());
  for (long t = t0; t < n; ++t) {
    bool ok = true;
    for (long later = t; later < n; ++later) {
      if (deviation[later] > e) {
        ok = false;
        break;
      }
    }
    if (ok) {
      *recovered = true;
      return t - t0;
    }
  }
  *recovered = false;
  return -1;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline rlstm::LstmParams random_model(std::uint64_t seed, Eigen::Index n_x,
                                      Eigen::Index n_c, Eigen::Index n_y,
                                      Eigen::Index n_layers, double scale,
                                      double x_max = 1.0) {
  rlstm::CounterRng rng(seed, "oracle-random-model");
  rlstm::LstmParams p = rlstm::LstmParams::zeros(n_x, n_c, n_y, n_layers, x_max);
  auto fill = [&](Matrix& m, double s) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-s, s);
    }
  };
  auto fill_vec = [&](Vector& v, double s) {
    for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = rng.uniform(-s, s);
  };
  for (auto& layer : p.layers) {
    fill(layer.W_f, scale); fill(layer.W_i, scale);
    fill(layer.W_c, scale); fill(layer.W_o, scale);
    fill(layer.U_f, scale); fill(layer.U_i, scale);
    fill(layer.U_c, scale); fill(layer.U_o, scale);
    fill_vec(layer.b_f, scale); fill_vec(layer.b_i, scale);
    fill_vec(layer.b_c, scale); fill_vec(layer.b_o, scale);
  }
  fill(p.U_y, scale);
  fill_vec(p.b_y, scale);
  return p;
}

}  // namespace oracles
