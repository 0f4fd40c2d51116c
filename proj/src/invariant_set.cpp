#include "rlstm/invariant_set.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlstm {

namespace {

double safe_one_minus(double sigma_f, const char* where) {
  const double denom = 1.0 - sigma_f;
  if (denom < 1e-12) {
    std::ostringstream s;
    s << where << ": degenerate forget gate (1 - sigma_f = " << denom << ")";
    throw std::runtime_error(s.str());
  }
  return denom;
}

double row_bound(const Matrix& w, const Matrix& u, double bias, double eta,
                 double x_max_layer, Eigen::Index row) {
  return x_max_layer * w.row(row).cwiseAbs().sum() +
         eta * u.row(row).cwiseAbs().sum() + bias;
}

const Matrix& gate_w(const LstmLayerParams& p, Gate g) {
  switch (g) {
    case Gate::f: return p.W_f;
    case Gate::i: return p.W_i;
    default: return p.W_o;
  }
}

const Matrix& gate_u(const LstmLayerParams& p, Gate g) {
  switch (g) {
    case Gate::f: return p.U_f;
    case Gate::i: return p.U_i;
    default: return p.U_o;
  }
}

const Vector& gate_b(const LstmLayerParams& p, Gate g) {
  switch (g) {
    case Gate::f: return p.b_f;
    case Gate::i: return p.b_i;
    default: return p.b_o;
  }
}

// Helper bundle used by the eta(inf) tangent iteration.
struct GValues {
  double f, i, c, o;
};

GValues eval_g(const LstmLayerParams& layer, double w, double x_max_layer) {
  return {g_gate(layer, Gate::f, w, x_max_layer),
          g_gate(layer, Gate::i, w, x_max_layer),
          g_cell(layer, w, x_max_layer),
          g_gate(layer, Gate::o, w, x_max_layer)};
}

double g_bar_from(const GValues& g) {
  const double denom = safe_one_minus(stable_sigmoid(g.f), "eta_infinity_approx");
  return stable_sigmoid(g.o) *
         std::tanh(stable_sigmoid(g.i) * std::tanh(g.c) / denom);
}

double sigma_tangent(double a, double a0) {
  const double s0 = stable_sigmoid(a0);
  return s0 + s0 * (1.0 - s0) * (a - a0);
}

double phi_tangent(double a, double a0) {
  const double p0 = std::tanh(a0);
  return p0 + (1.0 - p0 * p0) * (a - a0);
}

// Tangent-line upper bound g_check(w; w0) of g_bar(w) for 0 <= w <= w0.
double g_check(const GValues& g, const GValues& g0) {
  const double denom = safe_one_minus(stable_sigmoid(g.f), "eta_infinity_approx");
  const double denom0 = safe_one_minus(stable_sigmoid(g0.f), "eta_infinity_approx");
  const double inner = sigma_tangent(g.i, g0.i) * phi_tangent(g.c, g0.c) / denom;
  const double inner0 = stable_sigmoid(g0.i) * std::tanh(g0.c) / denom0;
  return sigma_tangent(g.o, g0.o) * phi_tangent(inner, inner0);
}

}  // namespace

double g_gate(const LstmLayerParams& layer, Gate gate, double eta_prev,
              double x_max_layer) {
  if (eta_prev < 0.0 || eta_prev > 1.0) {
    throw std::invalid_argument("g_gate: eta_prev outside [0, 1]");
  }
  if (x_max_layer <= 0.0) throw std::invalid_argument("g_gate: x_max must be positive");
  const Matrix& w = gate_w(layer, gate);
  const Matrix& u = gate_u(layer, gate);
  const Vector& b = gate_b(layer, gate);
  double worst = 0.0;  // the positive-part clamp makes the norm at least 0
  for (Eigen::Index r = 0; r < layer.cell_size(); ++r) {
    worst = std::max(worst, row_bound(w, u, b(r), eta_prev, x_max_layer, r));
  }
  return worst;
}

double g_cell(const LstmLayerParams& layer, double eta_prev, double x_max_layer) {
  if (eta_prev < 0.0 || eta_prev > 1.0) {
    throw std::invalid_argument("g_cell: eta_prev outside [0, 1]");
  }
  if (x_max_layer <= 0.0) throw std::invalid_argument("g_cell: x_max must be positive");
  double worst = 0.0;
  for (Eigen::Index r = 0; r < layer.cell_size(); ++r) {
    worst = std::max(worst, row_bound(layer.W_c, layer.U_c, std::abs(layer.b_c(r)),
                                      eta_prev, x_max_layer, r));
  }
  return worst;
}

double layer_input_bound(const LstmParams& params, std::size_t layer) {
  return layer == 0 ? params.x_max : 1.0;
}

GammaSequences compute_sequences(const LstmParams& params, int k_max) {
  if (k_max < 0) throw std::invalid_argument("compute_sequences: k_max < 0");
  params.validate();

  GammaSequences seq;
  seq.k_max = k_max;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const double x_bound = layer_input_bound(params, l);
    LayerSequences s;
    const int n = k_max + 1;
    s.sigma_f.reserve(n);
    s.sigma_i.reserve(n);
    s.sigma_o.reserve(n);
    s.phi_c.reserve(n);
    s.eta.reserve(n);
    s.c_bar.reserve(n);

    double eta_prev = 1.0;
    for (int k = 0; k <= k_max; ++k) {
      const double sf = stable_sigmoid(g_gate(layer, Gate::f, eta_prev, x_bound));
      const double si = stable_sigmoid(g_gate(layer, Gate::i, eta_prev, x_bound));
      const double so = stable_sigmoid(g_gate(layer, Gate::o, eta_prev, x_bound));
      const double pc = std::tanh(g_cell(layer, eta_prev, x_bound));
      const double denom = safe_one_minus(sf, "compute_sequences");
      const double cb = si * pc / denom;
      const double eta = std::tanh(cb) * so;

      s.sigma_f.push_back(sf);
      s.sigma_i.push_back(si);
      s.sigma_o.push_back(so);
      s.phi_c.push_back(pc);
      s.c_bar.push_back(cb);
      s.eta.push_back(eta);
      if (s.effective_k_inf < 0 && std::abs(eta - eta_prev) < 1e-12) {
        s.effective_k_inf = k;
      }
      eta_prev = eta;
    }
    seq.layers.push_back(std::move(s));
  }
  return seq;
}

SetBounds bounds(const GammaSequences& seq, int layer, int k) {
  if (layer < 0 || layer >= static_cast<int>(seq.layers.size())) {
    throw std::invalid_argument("bounds: layer index out of range");
  }
  if (k < 0 || k > seq.k_max) throw std::invalid_argument("bounds: k out of range");
  const auto& s = seq.layers[layer];
  SetBounds b;
  b.k = k;
  b.c_bound = s.c_bar[k];
  b.h_bound = std::tanh(s.c_bar[k]) * s.sigma_o[k];
  return b;
}

std::vector<SetBounds> all_bounds(const GammaSequences& seq, int k) {
  std::vector<SetBounds> out;
  out.reserve(seq.layers.size());
  for (std::size_t l = 0; l < seq.layers.size(); ++l) {
    out.push_back(bounds(seq, static_cast<int>(l), k));
  }
  return out;
}

bool membership(const LstmState& state, const std::vector<SetBounds>& box,
                double tol) {
  if (state.c.size() != box.size()) {
    throw std::invalid_argument("membership: bounds/layer count mismatch");
  }
  for (std::size_t l = 0; l < box.size(); ++l) {
    if (state.c[l].cwiseAbs().maxCoeff() > box[l].c_bound + tol) return false;
    if (state.h[l].cwiseAbs().maxCoeff() > box[l].h_bound + tol) return false;
  }
  return true;
}

EtaInfinity eta_infinity_approx(const LstmParams& params, int layer, double tol,
                                int max_iter) {
  if (tol <= 0.0) throw std::invalid_argument("eta_infinity_approx: tol must be positive");
  if (layer < 0 || layer >= static_cast<int>(params.layers.size())) {
    throw std::invalid_argument("eta_infinity_approx: layer index out of range");
  }
  const auto& p = params.layers[layer];
  const double x_bound = layer_input_bound(params, static_cast<std::size_t>(layer));

  const double kappa = g_bar_from(eval_g(p, 0.0, x_bound));
  const GValues g_kappa = eval_g(p, kappa, x_bound);
  double eta = g_bar_from(eval_g(p, 1.0, x_bound));

  EtaInfinity out;
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter;
    if (eta - kappa < tol) break;  // bracket already tight
    const GValues g_eta = eval_g(p, eta, x_bound);
    const double bar = g_bar_from(g_eta);
    const double check = g_check(g_kappa, g_eta);
    const double denom = eta - kappa - bar + check;
    if (std::abs(denom) < 1e-14) {
      out.stalled = true;
      break;
    }
    const double next = (eta * check - kappa * bar) / denom;
    const double delta = std::abs(next - eta);
    eta = next;
    if (delta < tol) {
      out.iterations = iter + 1;
      break;
    }
  }
  out.value = eta;
  return out;
}

}  // namespace rlstm
