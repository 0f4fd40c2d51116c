#pragma once

#include <vector>

#include "rlstm/lstm.hpp"

namespace rlstm {

enum class Gate { f, i, o };

// Recursive gate/cell bound sequences of one layer, indices k = 0..k_max.
// The recursion starts from eta(-1) = 1, which is not stored.
struct LayerSequences {
  std::vector<double> sigma_f, sigma_i, sigma_o;  // in [0.5, 1)
  std::vector<double> phi_c;                      // in [0, 1)
  std::vector<double> eta;                        // in [0, 1]
  std::vector<double> c_bar;                      // >= 0
  // First k with |eta(k) - eta(k-1)| < 1e-12, or -1 if none; informational.
  int effective_k_inf = -1;
};

struct GammaSequences {
  std::vector<LayerSequences> layers;
  int k_max = 0;
};

// Box radii of the invariant set of one layer at index k:
// c_bound = c_bar(k), h_bound = tanh(c_bar(k)) * sigma_o(k).
struct SetBounds {
  double c_bound = 0.0;
  double h_bound = 0.0;
  int k = 0;
};

struct EtaInfinity {
  double value = 0.0;
  int iterations = 0;
  bool stalled = false;
};

// ||(x_max |W_*| 1 + eta |U_*| 1 + b_*)_+||_inf for gate * in {f,i,o}.
double g_gate(const LstmLayerParams& layer, Gate gate, double eta_prev,
              double x_max_layer);

// ||x_max |W_c| 1 + eta |U_c| 1 + |b_c|||_inf (absolute bias, no clamp).
double g_cell(const LstmLayerParams& layer, double eta_prev, double x_max_layer);

// Effective input bound of layer l (0-based): params.x_max for the first
// layer, 1 for deeper layers whose inputs are hidden states in (-1, 1).
double layer_input_bound(const LstmParams& params, std::size_t layer);

GammaSequences compute_sequences(const LstmParams& params, int k_max);

SetBounds bounds(const GammaSequences& seq, int layer, int k);

std::vector<SetBounds> all_bounds(const GammaSequences& seq, int k);

bool membership(const LstmState& state, const std::vector<SetBounds>& box,
                double tol = 1e-9);

// Upper bound on the limit eta(inf) of one layer via the tangent-line
// iteration; result lies in [g_bar(0), g_bar(1)] and dominates every eta(k).
EtaInfinity eta_infinity_approx(const LstmParams& params, int layer, double tol,
                                int max_iter);

}  // namespace rlstm
