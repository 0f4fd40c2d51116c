#pragma once

#include <utility>
#include <vector>

#include "rlstm/linalg.hpp"

namespace rlstm {

// One stacked-LSTM layer. W_* map the layer input (n_in), U_* the hidden
// state (n_c), b_* are biases. Layer 1 takes the external input; layer
// l >= 2 takes the hidden state of layer l-1 produced in the same step.
struct LstmLayerParams {
  Matrix W_f, W_i, W_c, W_o;  // n_c x n_in
  Matrix U_f, U_i, U_c, U_o;  // n_c x n_c
  Vector b_f, b_i, b_c, b_o;  // n_c

  Eigen::Index cell_size() const { return U_f.rows(); }
  Eigen::Index input_size() const { return W_f.cols(); }

  // Throws std::invalid_argument naming the layer and the offending shape.
  void validate(int layer_index, Eigen::Index expected_input) const;

  static LstmLayerParams zeros(Eigen::Index n_in, Eigen::Index n_c);
};

struct LstmParams {
  std::vector<LstmLayerParams> layers;
  Matrix U_y;  // n_y x n_c of the last layer
  Vector b_y;  // n_y
  double x_max = 1.0;

  Eigen::Index num_layers() const { return static_cast<Eigen::Index>(layers.size()); }
  Eigen::Index input_size() const { return layers.front().input_size(); }
  Eigen::Index output_size() const { return U_y.rows(); }

  void validate() const;

  static LstmParams zeros(Eigen::Index n_x, Eigen::Index n_c, Eigen::Index n_y,
                          Eigen::Index n_layers = 1, double x_max = 1.0);
};

struct LstmState {
  std::vector<Vector> c;
  std::vector<Vector> h;

  void validate(const LstmParams& params) const;
};

// States s(0..T) and outputs y(0..T) for inputs x(0..T-1); y(t) reads the
// hidden state after t steps, so y(t) = U_y h^(L)(t) + b_y.
struct Trace {
  std::vector<Vector> inputs;
  std::vector<LstmState> states;
  std::vector<Vector> outputs;
  int bound_violations = 0;  // input samples with |x_i| > x_max

  std::size_t num_steps() const { return inputs.size(); }
};

LstmState zero_state(const LstmParams& params);

// One step of the stacked dynamics. Layer l >= 2 is fed the hidden state
// just produced by layer l-1. The returned output reads the new hidden
// state of the top layer.
std::pair<LstmState, Vector> step(const LstmParams& params, const LstmState& state,
                                  const Vector& x);

Trace simulate(const LstmParams& params, const LstmState& s0,
               const std::vector<Vector>& xs);

Vector readout(const LstmParams& params, const LstmState& state);

}  // namespace rlstm
