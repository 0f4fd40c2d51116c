#include "rlstm/lstm.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlstm {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string shape_of(const Matrix& m) {
  std::ostringstream s;
  s << m.rows() << "x" << m.cols();
  return s.str();
}

void check_matrix(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  int layer, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream s;
    s << "layer " << layer << ": " << name << " expected " << rows << "x" << cols
      << ", got " << shape_of(m);
    throw std::invalid_argument(s.str());
  }
  if (!m.allFinite()) {
    std::ostringstream s;
    s << "layer " << layer << ": " << name << " has non-finite entries";
    throw std::invalid_argument(s.str());
  }
}

Vector gate_preactivation(const Matrix& w, const Matrix& u, const Vector& b,
                          const Vector& x, const Vector& h) {
  return w * x + u * h + b;
}

}  // namespace

void LstmLayerParams::validate(int layer_index, Eigen::Index expected_input) const {
  const Eigen::Index n_c = U_f.rows();
  require(n_c > 0, "layer " + std::to_string(layer_index) + ": empty cell dimension");
  check_matrix(W_f, n_c, expected_input, layer_index, "W_f");
  check_matrix(W_i, n_c, expected_input, layer_index, "W_i");
  check_matrix(W_c, n_c, expected_input, layer_index, "W_c");
  check_matrix(W_o, n_c, expected_input, layer_index, "W_o");
  check_matrix(U_f, n_c, n_c, layer_index, "U_f");
  check_matrix(U_i, n_c, n_c, layer_index, "U_i");
  check_matrix(U_c, n_c, n_c, layer_index, "U_c");
  check_matrix(U_o, n_c, n_c, layer_index, "U_o");
  check_matrix(b_f, n_c, 1, layer_index, "b_f");
  check_matrix(b_i, n_c, 1, layer_index, "b_i");
  check_matrix(b_c, n_c, 1, layer_index, "b_c");
  check_matrix(b_o, n_c, 1, layer_index, "b_o");
}

LstmLayerParams LstmLayerParams::zeros(Eigen::Index n_in, Eigen::Index n_c) {
  LstmLayerParams p;
  p.W_f = p.W_i = p.W_c = p.W_o = Matrix::Zero(n_c, n_in);
  p.U_f = p.U_i = p.U_c = p.U_o = Matrix::Zero(n_c, n_c);
  p.b_f = p.b_i = p.b_c = p.b_o = Vector::Zero(n_c);
  return p;
}

void LstmParams::validate() const {
  require(!layers.empty(), "model has no layers");
  require(x_max > 0.0, "x_max must be positive");
  Eigen::Index expected = layers.front().input_size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate(static_cast<int>(l + 1), expected);
    expected = layers[l].cell_size();
  }
  check_matrix(U_y, U_y.rows(), layers.back().cell_size(),
               static_cast<int>(layers.size()), "U_y");
  require(U_y.rows() > 0, "U_y has no rows");
  check_matrix(b_y, U_y.rows(), 1, static_cast<int>(layers.size()), "b_y");
}

LstmParams LstmParams::zeros(Eigen::Index n_x, Eigen::Index n_c, Eigen::Index n_y,
                             Eigen::Index n_layers, double x_max) {
  LstmParams p;
  Eigen::Index in = n_x;
  for (Eigen::Index l = 0; l < n_layers; ++l) {
    p.layers.push_back(LstmLayerParams::zeros(in, n_c));
    in = n_c;
  }
  p.U_y = Matrix::Zero(n_y, n_c);
  p.b_y = Vector::Zero(n_y);
  p.x_max = x_max;
  return p;
}

void LstmState::validate(const LstmParams& params) const {
  require(c.size() == params.layers.size() && h.size() == params.layers.size(),
          "state layer count does not match model");
  for (std::size_t l = 0; l < c.size(); ++l) {
    const Eigen::Index n_c = params.layers[l].cell_size();
    if (c[l].size() != n_c || h[l].size() != n_c) {
      std::ostringstream s;
      s << "layer " << (l + 1) << ": state expected size " << n_c << ", got c="
        << c[l].size() << " h=" << h[l].size();
      throw std::invalid_argument(s.str());
    }
  }
}

LstmState zero_state(const LstmParams& params) {
  LstmState s;
  for (const auto& layer : params.layers) {
    s.c.push_back(Vector::Zero(layer.cell_size()));
    s.h.push_back(Vector::Zero(layer.cell_size()));
  }
  return s;
}

Vector readout(const LstmParams& params, const LstmState& state) {
  return params.U_y * state.h.back() + params.b_y;
}

std::pair<LstmState, Vector> step(const LstmParams& params, const LstmState& state,
                                  const Vector& x) {
  if (x.size() != params.input_size()) {
    std::ostringstream s;
    s << "layer 1: input expected size " << params.input_size() << ", got "
      << x.size();
    throw std::invalid_argument(s.str());
  }
  state.validate(params);

  LstmState next;
  next.c.reserve(params.layers.size());
  next.h.reserve(params.layers.size());
  Vector layer_input = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& p = params.layers[l];
    const Vector& h_prev = state.h[l];
    const Vector& c_prev = state.c[l];
    const Vector zf = gate_preactivation(p.W_f, p.U_f, p.b_f, layer_input, h_prev);
    const Vector zi = gate_preactivation(p.W_i, p.U_i, p.b_i, layer_input, h_prev);
    const Vector zc = gate_preactivation(p.W_c, p.U_c, p.b_c, layer_input, h_prev);
    const Vector zo = gate_preactivation(p.W_o, p.U_o, p.b_o, layer_input, h_prev);

    Vector c_next(p.cell_size());
    Vector h_next(p.cell_size());
    for (Eigen::Index j = 0; j < p.cell_size(); ++j) {
      const double f = stable_sigmoid(zf(j));
      const double i = stable_sigmoid(zi(j));
      const double g = std::tanh(zc(j));
      const double o = stable_sigmoid(zo(j));
      c_next(j) = f * c_prev(j) + i * g;
      h_next(j) = o * std::tanh(c_next(j));
    }
    next.c.push_back(std::move(c_next));
    next.h.push_back(h_next);
    layer_input = std::move(h_next);
  }
  return {std::move(next), params.U_y * layer_input + params.b_y};
}

Trace simulate(const LstmParams& params, const LstmState& s0,
               const std::vector<Vector>& xs) {
  if (xs.empty()) throw std::invalid_argument("simulate: empty input sequence");
  s0.validate(params);

  Trace trace;
  trace.inputs = xs;
  trace.states.reserve(xs.size() + 1);
  trace.outputs.reserve(xs.size() + 1);
  trace.states.push_back(s0);
  trace.outputs.push_back(readout(params, s0));
  LstmState current = s0;
  for (const Vector& x : xs) {
    if (x.cwiseAbs().maxCoeff() > params.x_max * (1.0 + 1e-12)) {
      ++trace.bound_violations;
    }
    auto [next, y] = step(params, current, x);
    trace.states.push_back(next);
    trace.outputs.push_back(std::move(y));
    current = std::move(next);
  }
  return trace;
}

}  // namespace rlstm
