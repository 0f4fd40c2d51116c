#include "rlstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rlstm/invariant_set.hpp"
#include "rlstm/rng.hpp"
#include "rlstm/stability.hpp"

namespace rlstm {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kPlateauFactor = 0.1;
constexpr int kPlateauPatience = 10;
constexpr double kPlateauRelThreshold = 1e-4;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Per-step tape of the bound recursion, enough to replay it backwards.
struct GateTape {
  Eigen::Index argmax_row = 0;
  bool active = false;  // whether the clamped max is strictly positive
  double value = 0.0;   // sigma or phi of the row bound
};

struct RecursionTape {
  GateTape f, i, o, c;
  double denom = 0.0;       // 1 - sigma_f
  double c_bar = 0.0;
  double tanh_c_bar = 0.0;
  double sigma_o = 0.0;
  double eta_prev = 1.0;
};

GateTape forward_gate(const Matrix& w, const Matrix& u, const Vector& b,
                      bool abs_bias, bool clamp, double eta_prev,
                      double x_max_layer) {
  GateTape tape;
  double best = clamp ? 0.0 : -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    const double bias = abs_bias ? std::abs(b(r)) : b(r);
    const double v = x_max_layer * w.row(r).cwiseAbs().sum() +
                     eta_prev * u.row(r).cwiseAbs().sum() + bias;
    if (v > best) {
      best = v;
      tape.argmax_row = r;
      tape.active = true;
    }
  }
  tape.value = std::max(best, 0.0);
  // Rows clamped to zero (or a gate whose every row is nonpositive) carry no
  // gradient.
  if (best <= 0.0) tape.active = false;
  return tape;
}

struct GateAdjoint {
  Matrix* dW;
  Matrix* dU;
  Vector* db;
  const Matrix* W;
  const Matrix* U;
  const Vector* b;
  bool abs_bias;
};

// Accumulates d(row bound)/d(params) for the argmax row and returns the
// adjoint that flows into eta(j-1).
double backward_gate(const GateTape& tape, double d_g, const GateAdjoint& adj,
                     double eta_prev, double x_max_layer) {
  if (!tape.active || d_g == 0.0) return 0.0;
  const Eigen::Index r = tape.argmax_row;
  for (Eigen::Index col = 0; col < adj.W->cols(); ++col) {
    adj.dW->coeffRef(r, col) += d_g * x_max_layer * sign((*adj.W)(r, col));
  }
  for (Eigen::Index col = 0; col < adj.U->cols(); ++col) {
    adj.dU->coeffRef(r, col) += d_g * eta_prev * sign((*adj.U)(r, col));
  }
  adj.db->coeffRef(r) += adj.abs_bias ? d_g * sign((*adj.b)(r)) : d_g;
  return d_g * adj.U->row(r).cwiseAbs().sum();
}

// d rho / d entries of the nonnegative 2x2 matrix, quadratic-formula branch.
struct RhoGrad {
  double a11, a12, a21, a22;
};

RhoGrad rho_gradient(const CertMatrix& a) {
  const double diff = a.a11 - a.a22;
  const double disc = diff * diff + 4.0 * a.a12 * a.a21;
  const double root = std::max(std::sqrt(disc), 1e-18);
  RhoGrad g;
  g.a11 = 0.5 * (1.0 + diff / root);
  g.a22 = 0.5 * (1.0 - diff / root);
  g.a12 = a.a21 / root;
  g.a21 = a.a12 / root;
  return g;
}

// Spectral radius of one layer's contraction matrix at index k, with the
// hinge subgradient written into grad_out when the hinge is active. Norm
// values and singular pairs are computed once and shared between the value
// and the backward pass.
struct NormCache {
  Vector u_f, u_i, u_c, u_o;
};

double layer_hinge(const LstmLayerParams& p, double x_max_layer, int k,
                   double epsilon, LstmLayerParams* grad_out,
                   NormCache* cache = nullptr) {
  // Forward replay of the recursion with tapes.
  std::vector<RecursionTape> tape(k + 1);
  double eta_prev = 1.0;
  for (int j = 0; j <= k; ++j) {
    RecursionTape& t = tape[j];
    t.eta_prev = eta_prev;
    t.f = forward_gate(p.W_f, p.U_f, p.b_f, false, true, eta_prev, x_max_layer);
    t.i = forward_gate(p.W_i, p.U_i, p.b_i, false, true, eta_prev, x_max_layer);
    t.o = forward_gate(p.W_o, p.U_o, p.b_o, false, true, eta_prev, x_max_layer);
    t.c = forward_gate(p.W_c, p.U_c, p.b_c, true, false, eta_prev, x_max_layer);
    const double sf = stable_sigmoid(t.f.value);
    const double si = stable_sigmoid(t.i.value);
    const double so = stable_sigmoid(t.o.value);
    const double pc = std::tanh(t.c.value);
    t.denom = 1.0 - sf;
    if (t.denom < 1e-12) {
      throw std::runtime_error("penalty_gradient: degenerate forget gate");
    }
    t.c_bar = si * pc / t.denom;
    t.tanh_c_bar = std::tanh(t.c_bar);
    t.sigma_o = so;
    eta_prev = t.tanh_c_bar * so;
  }

  const RecursionTape& last = tape[k];
  const double sf = stable_sigmoid(last.f.value);
  const double si = stable_sigmoid(last.i.value);
  const double so = last.sigma_o;
  const double pc = std::tanh(last.c.value);
  const double cb = last.c_bar;
  const double phi_cb = last.tanh_c_bar;

  const SingularPair svd_uf = dominant_singular(p.U_f, cache ? &cache->u_f : nullptr);
  const SingularPair svd_uc = dominant_singular(p.U_c, cache ? &cache->u_c : nullptr);
  const SingularPair svd_ui = dominant_singular(p.U_i, cache ? &cache->u_i : nullptr);
  const SingularPair svd_uo = dominant_singular(p.U_o, cache ? &cache->u_o : nullptr);

  CertMatrix a;
  a.alpha_s = 0.25 * svd_uf.value * cb + si * svd_uc.value + 0.25 * svd_ui.value * pc;
  a.a11 = sf;
  a.a12 = a.alpha_s;
  a.a21 = so * sf;
  a.a22 = a.alpha_s * so + 0.25 * phi_cb * svd_uo.value;
  const double rho = spectral_radius_2x2(a);
  if (grad_out == nullptr || rho - 1.0 + epsilon <= 0.0) {
    return rho;
  }
  const RhoGrad dr = rho_gradient(a);

  // Adjoints of the stage-k quantities.
  const double d_alpha = dr.a12 + dr.a22 * so;
  double d_sf = dr.a11 + dr.a21 * so;
  double d_si = d_alpha * svd_uc.value;
  double d_so = dr.a21 * sf + dr.a22 * a.alpha_s;
  double d_pc = d_alpha * 0.25 * svd_ui.value;
  double d_cb = d_alpha * 0.25 * svd_uf.value +
                dr.a22 * 0.25 * svd_uo.value * (1.0 - phi_cb * phi_cb);

  LstmLayerParams& grad = *grad_out;
  // Norm terms enter rho only at stage k.
  grad.U_f += (d_alpha * 0.25 * cb) * (svd_uf.left * svd_uf.right.transpose());
  grad.U_c += (d_alpha * si) * (svd_uc.left * svd_uc.right.transpose());
  grad.U_i += (d_alpha * 0.25 * pc) * (svd_ui.left * svd_ui.right.transpose());
  grad.U_o += (dr.a22 * 0.25 * phi_cb) * (svd_uo.left * svd_uo.right.transpose());

  const GateAdjoint adj_f{&grad.W_f, &grad.U_f, &grad.b_f, &p.W_f, &p.U_f, &p.b_f, false};
  const GateAdjoint adj_i{&grad.W_i, &grad.U_i, &grad.b_i, &p.W_i, &p.U_i, &p.b_i, false};
  const GateAdjoint adj_o{&grad.W_o, &grad.U_o, &grad.b_o, &p.W_o, &p.U_o, &p.b_o, false};
  const GateAdjoint adj_c{&grad.W_c, &grad.U_c, &grad.b_c, &p.W_c, &p.U_c, &p.b_c, true};

  double d_eta = 0.0;  // adjoint of eta(j), consumed by step j+1
  for (int j = k; j >= 0; --j) {
    const RecursionTape& t = tape[j];
    const double sf_j = stable_sigmoid(t.f.value);
    const double si_j = stable_sigmoid(t.i.value);
    const double so_j = t.sigma_o;
    const double pc_j = std::tanh(t.c.value);

    double dsf = 0.0, dsi = 0.0, dso = 0.0, dpc = 0.0, dcb = 0.0;
    if (j == k) {
      dsf = d_sf;
      dsi = d_si;
      dso = d_so;
      dpc = d_pc;
      dcb = d_cb;
    }
    // eta(j) = tanh(c_bar(j)) * sigma_o(j)
    dcb += d_eta * (1.0 - t.tanh_c_bar * t.tanh_c_bar) * so_j;
    dso += d_eta * t.tanh_c_bar;
    // c_bar = sigma_i * phi_c / (1 - sigma_f)
    dsi += dcb * pc_j / t.denom;
    dpc += dcb * si_j / t.denom;
    dsf += dcb * si_j * pc_j / (t.denom * t.denom);

    const double d_gf = dsf * sf_j * (1.0 - sf_j);
    const double d_gi = dsi * si_j * (1.0 - si_j);
    const double d_go = dso * so_j * (1.0 - so_j);
    const double d_gc = dpc * (1.0 - pc_j * pc_j);

    double d_eta_prev = 0.0;
    d_eta_prev += backward_gate(t.f, d_gf, adj_f, t.eta_prev, x_max_layer);
    d_eta_prev += backward_gate(t.i, d_gi, adj_i, t.eta_prev, x_max_layer);
    d_eta_prev += backward_gate(t.o, d_go, adj_o, t.eta_prev, x_max_layer);
    d_eta_prev += backward_gate(t.c, d_gc, adj_c, t.eta_prev, x_max_layer);
    d_eta = d_eta_prev;  // eta(-1) = 1 is constant, so the last one is dropped
  }
  return rho;
}

struct HingeEval {
  double value = 0.0;
  std::vector<LstmLayerParams> grads;
};

HingeEval hinge_eval(const LstmParams& params, int k, double epsilon,
                     std::vector<NormCache>* caches = nullptr) {
  HingeEval out;
  out.grads.reserve(params.layers.size());
  if (caches != nullptr) caches->resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& p = params.layers[l];
    LstmLayerParams grad = LstmLayerParams::zeros(p.input_size(), p.cell_size());
    const double rho =
        layer_hinge(p, layer_input_bound(params, l), k, epsilon, &grad,
                    caches ? &(*caches)[l] : nullptr);
    out.value += std::max(rho - 1.0 + epsilon, 0.0);
    out.grads.push_back(std::move(grad));
  }
  return out;
}

template <class F>
void visit_params(LstmParams& p, F&& f) {
  for (auto& l : p.layers) {
    f(l.W_f); f(l.W_i); f(l.W_c); f(l.W_o);
    f(l.U_f); f(l.U_i); f(l.U_c); f(l.U_o);
    f(l.b_f); f(l.b_i); f(l.b_c); f(l.b_o);
  }
  f(p.U_y);
  f(p.b_y);
}

template <class F>
void visit_params4(LstmParams& a, LstmParams& b, LstmParams& c, LstmParams& d, F&& f) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    auto& la = a.layers[l]; auto& lb = b.layers[l];
    auto& lc = c.layers[l]; auto& ld = d.layers[l];
    f(la.W_f, lb.W_f, lc.W_f, ld.W_f); f(la.W_i, lb.W_i, lc.W_i, ld.W_i);
    f(la.W_c, lb.W_c, lc.W_c, ld.W_c); f(la.W_o, lb.W_o, lc.W_o, ld.W_o);
    f(la.U_f, lb.U_f, lc.U_f, ld.U_f); f(la.U_i, lb.U_i, lc.U_i, ld.U_i);
    f(la.U_c, lb.U_c, lc.U_c, ld.U_c); f(la.U_o, lb.U_o, lc.U_o, ld.U_o);
    f(la.b_f, lb.b_f, lc.b_f, ld.b_f); f(la.b_i, lb.b_i, lc.b_i, ld.b_i);
    f(la.b_c, lb.b_c, lc.b_c, ld.b_c); f(la.b_o, lb.b_o, lc.b_o, ld.b_o);
  }
  f(a.U_y, b.U_y, c.U_y, d.U_y);
  f(a.b_y, b.b_y, c.b_y, d.b_y);
}

LstmParams zeros_like(const LstmParams& p) {
  LstmParams z = p;
  visit_params(z, [](auto& t) { t.setZero(); });
  return z;
}

void check_single_layer(const LstmParams& params, const char* where) {
  if (params.layers.size() != 1) {
    throw std::invalid_argument(std::string(where) +
                                ": only single-layer models are supported");
  }
}

}  // namespace

double penalty(const LstmParams& params, int k, double epsilon) {
  if (epsilon < 0.0 || epsilon > 0.5) {
    throw std::invalid_argument("penalty: epsilon outside [0, 0.5]");
  }
  const Certificate cert = certify(params, k);
  double total = 0.0;
  for (const auto& layer : cert.layers) {
    total += std::max(layer.rho - 1.0 + epsilon, 0.0);
  }
  return total;
}

std::vector<LstmLayerParams> penalty_gradient(const LstmParams& params, int k,
                                              double epsilon) {
  if (epsilon < 0.0 || epsilon > 0.5) {
    throw std::invalid_argument("penalty_gradient: epsilon outside [0, 0.5]");
  }
  params.validate();
  return hinge_eval(params, k, epsilon).grads;
}

BpttResult bptt_gradient(const LstmParams& params, const std::vector<Window>& batch,
                         int warmup_discard) {
  check_single_layer(params, "bptt_gradient");
  params.validate();
  if (batch.empty()) throw std::invalid_argument("bptt_gradient: empty batch");

  const auto& p = params.layers[0];
  const Eigen::Index n_c = p.cell_size();
  const Eigen::Index n_x = p.input_size();
  const Eigen::Index n_y = params.output_size();
  const Eigen::Index n_b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index steps = batch.front().inputs.cols();

  for (const auto& w : batch) {
    if (w.inputs.rows() != n_x || w.targets.rows() != n_y ||
        w.inputs.cols() != steps || w.targets.cols() != steps) {
      throw std::invalid_argument("bptt_gradient: window shape mismatch");
    }
  }
  if (steps <= warmup_discard) {
    throw std::invalid_argument("bptt_gradient: window no longer than warmup discard");
  }
  const double inv_count =
      1.0 / (static_cast<double>(n_b) * static_cast<double>(steps - warmup_discard) *
             static_cast<double>(n_y));

  // Time-major batched layout: one (rows x n_b) panel per step keeps every
  // update a matrix product across the whole batch.
  std::vector<Matrix> x_t(steps, Matrix(n_x, n_b));
  std::vector<Matrix> y_t(steps, Matrix(n_y, n_b));
  for (Eigen::Index b = 0; b < n_b; ++b) {
    for (Eigen::Index t = 0; t < steps; ++t) {
      x_t[t].col(b) = batch[b].inputs.col(t);
      y_t[t].col(b) = batch[b].targets.col(t);
    }
  }

  std::vector<Matrix> f_t(steps), i_t(steps), g_t(steps), o_t(steps), tanh_c(steps);
  std::vector<Matrix> h_states(steps + 1), c_states(steps + 1), preds(steps);
  h_states[0] = Matrix::Zero(n_c, n_b);
  c_states[0] = Matrix::Zero(n_c, n_b);

  BpttResult result;
  result.gradients = zeros_like(params);
  auto& g = result.gradients.layers[0];

  const auto sigmoid_all = [](Matrix& m) {
    for (Eigen::Index idx = 0; idx < m.size(); ++idx) {
      m.data()[idx] = stable_sigmoid(m.data()[idx]);
    }
  };

  for (Eigen::Index t = 0; t < steps; ++t) {
    const Matrix& h = h_states[t];
    f_t[t] = (p.W_f * x_t[t] + p.U_f * h).colwise() + p.b_f;
    i_t[t] = (p.W_i * x_t[t] + p.U_i * h).colwise() + p.b_i;
    g_t[t] = (p.W_c * x_t[t] + p.U_c * h).colwise() + p.b_c;
    o_t[t] = (p.W_o * x_t[t] + p.U_o * h).colwise() + p.b_o;
    sigmoid_all(f_t[t]);
    sigmoid_all(i_t[t]);
    sigmoid_all(o_t[t]);
    g_t[t] = g_t[t].array().tanh();
    c_states[t + 1] =
        f_t[t].cwiseProduct(c_states[t]) + i_t[t].cwiseProduct(g_t[t]);
    tanh_c[t] = c_states[t + 1].array().tanh();
    h_states[t + 1] = o_t[t].cwiseProduct(tanh_c[t]);
    preds[t] = (params.U_y * h_states[t + 1]).colwise() + params.b_y;
    if (!preds[t].allFinite()) {
      std::ostringstream msg;
      msg << "bptt_gradient: non-finite output at step " << t;
      throw std::runtime_error(msg.str());
    }
    if (t >= warmup_discard) {
      result.task_loss += (preds[t] - y_t[t]).cwiseAbs().sum() * inv_count;
    }
  }

  Matrix dh = Matrix::Zero(n_c, n_b);
  Matrix dc = Matrix::Zero(n_c, n_b);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    if (t >= warmup_discard) {
      Matrix dpred(n_y, n_b);
      for (Eigen::Index idx = 0; idx < dpred.size(); ++idx) {
        dpred.data()[idx] = sign(preds[t].data()[idx] - y_t[t].data()[idx]) * inv_count;
      }
      result.gradients.U_y += dpred * h_states[t + 1].transpose();
      result.gradients.b_y += dpred.rowwise().sum();
      dh += params.U_y.transpose() * dpred;
    }
    const Matrix d_o = dh.cwiseProduct(tanh_c[t]);
    dc += dh.cwiseProduct(o_t[t]).cwiseProduct(
        (1.0 - tanh_c[t].array().square()).matrix());
    const Matrix d_f = dc.cwiseProduct(c_states[t]);
    const Matrix d_i = dc.cwiseProduct(g_t[t]);
    const Matrix d_g = dc.cwiseProduct(i_t[t]);
    const Matrix dc_prev = dc.cwiseProduct(f_t[t]);

    const Matrix dzf =
        d_f.cwiseProduct(f_t[t]).cwiseProduct((1.0 - f_t[t].array()).matrix());
    const Matrix dzi =
        d_i.cwiseProduct(i_t[t]).cwiseProduct((1.0 - i_t[t].array()).matrix());
    const Matrix dzo =
        d_o.cwiseProduct(o_t[t]).cwiseProduct((1.0 - o_t[t].array()).matrix());
    const Matrix dzg = d_g.cwiseProduct((1.0 - g_t[t].array().square()).matrix());

    g.W_f.noalias() += dzf * x_t[t].transpose();
    g.W_i.noalias() += dzi * x_t[t].transpose();
    g.W_c.noalias() += dzg * x_t[t].transpose();
    g.W_o.noalias() += dzo * x_t[t].transpose();
    g.U_f.noalias() += dzf * h_states[t].transpose();
    g.U_i.noalias() += dzi * h_states[t].transpose();
    g.U_c.noalias() += dzg * h_states[t].transpose();
    g.U_o.noalias() += dzo * h_states[t].transpose();
    g.b_f += dzf.rowwise().sum();
    g.b_i += dzi.rowwise().sum();
    g.b_c += dzg.rowwise().sum();
    g.b_o += dzo.rowwise().sum();

    dh = p.U_f.transpose() * dzf + p.U_i.transpose() * dzi +
         p.U_c.transpose() * dzg + p.U_o.transpose() * dzo;
    dc = dc_prev;
  }
  return result;
}

double mae(const std::vector<Matrix>& pred, const std::vector<Matrix>& target,
           int discard) {
  if (pred.size() != target.size() || pred.empty()) {
    throw std::invalid_argument("mae: batch size mismatch or empty");
  }
  double total = 0.0;
  long count = 0;
  for (std::size_t w = 0; w < pred.size(); ++w) {
    if (pred[w].rows() != target[w].rows() || pred[w].cols() != target[w].cols()) {
      throw std::invalid_argument("mae: shape mismatch");
    }
    for (Eigen::Index t = discard; t < pred[w].cols(); ++t) {
      total += (pred[w].col(t) - target[w].col(t)).cwiseAbs().sum();
      count += pred[w].rows();
    }
  }
  if (count == 0) throw std::invalid_argument("mae: no retained steps");
  return total / static_cast<double>(count);
}

namespace {

// Readout sequence of one window: column t is the prediction after
// consuming input column t.
Matrix predict_window(const LstmParams& params, const Matrix& inputs) {
  const auto& p = params.layers[0];
  const Eigen::Index n_c = p.cell_size();
  Vector c = Vector::Zero(n_c);
  Vector h = Vector::Zero(n_c);
  Matrix preds(params.output_size(), inputs.cols());
  for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
    const auto x = inputs.col(t);
    const Vector zf = p.W_f * x + p.U_f * h + p.b_f;
    const Vector zi = p.W_i * x + p.U_i * h + p.b_i;
    const Vector zc = p.W_c * x + p.U_c * h + p.b_c;
    const Vector zo = p.W_o * x + p.U_o * h + p.b_o;
    for (Eigen::Index j = 0; j < n_c; ++j) {
      const double f = stable_sigmoid(zf(j));
      const double i = stable_sigmoid(zi(j));
      const double gg = std::tanh(zc(j));
      const double o = stable_sigmoid(zo(j));
      c(j) = f * c(j) + i * gg;
      h(j) = o * std::tanh(c(j));
    }
    preds.col(t) = params.U_y * h + params.b_y;
  }
  return preds;
}

double validation_mae(const LstmParams& params, const std::vector<Window>& windows,
                      int discard) {
  std::vector<Matrix> preds, targets;
  preds.reserve(windows.size());
  targets.reserve(windows.size());
  for (const auto& w : windows) {
    preds.push_back(predict_window(params, w.inputs));
    targets.push_back(w.targets);
  }
  return mae(preds, targets, discard);
}

double safe_penalty(const LstmParams& params, int k, double epsilon) {
  try {
    return penalty(params, k, epsilon);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

TrainResult train(const LstmParams& params0, const SequenceDataset& dataset,
                  const TrainConfig& cfg) {
  check_single_layer(params0, "train");
  params0.validate();
  if (dataset.train.empty() || dataset.validation.empty()) {
    throw std::invalid_argument("train: dataset needs train and validation windows");
  }
  if (cfg.lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
  if (cfg.epsilon < 0.0 || cfg.epsilon > 0.5) {
    throw std::invalid_argument("train: epsilon outside [0, 0.5]");
  }
  if (cfg.warmup_discard >= cfg.window_length) {
    throw std::invalid_argument("train: warmup_discard must be below window_length");
  }

  TrainResult result;
  result.params = params0;
  LstmParams adam_m = zeros_like(params0);
  LstmParams adam_v = zeros_like(params0);
  long adam_step = 0;
  double lr = cfg.learning_rate;
  double best_monitored = std::numeric_limits<double>::infinity();
  int plateau_wait = 0;

  std::vector<NormCache> norm_caches;
  CounterRng shuffle_rng(cfg.seed, "batch-shuffle");
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_task = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<Window> batch;
      for (std::size_t i = start;
           i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
           ++i) {
        batch.push_back(dataset.train[order[i]]);
      }

      BpttResult bptt;
      try {
        bptt = bptt_gradient(result.params, batch, cfg.warmup_discard);
      } catch (const std::runtime_error& err) {
        result.diverged = true;
        result.note = err.what();
        return result;
      }
      LstmParams grads = std::move(bptt.gradients);

      double batch_penalty = 0.0;
      if (cfg.lambda > 0.0) {
        try {
          HingeEval hinge = hinge_eval(result.params, cfg.k, cfg.epsilon, &norm_caches);
          batch_penalty = hinge.value;
          if (batch_penalty > 0.0) {
            const auto& pg = hinge.grads;
            for (std::size_t l = 0; l < pg.size(); ++l) {
              auto& gl = grads.layers[l];
              const auto& sl = pg[l];
              gl.W_f += cfg.lambda * sl.W_f; gl.W_i += cfg.lambda * sl.W_i;
              gl.W_c += cfg.lambda * sl.W_c; gl.W_o += cfg.lambda * sl.W_o;
              gl.U_f += cfg.lambda * sl.U_f; gl.U_i += cfg.lambda * sl.U_i;
              gl.U_c += cfg.lambda * sl.U_c; gl.U_o += cfg.lambda * sl.U_o;
              gl.b_f += cfg.lambda * sl.b_f; gl.b_i += cfg.lambda * sl.b_i;
              gl.b_c += cfg.lambda * sl.b_c; gl.b_o += cfg.lambda * sl.b_o;
            }
          }
        } catch (const std::exception& err) {
          result.diverged = true;
          result.note = err.what();
          return result;
        }
      }

      const double total = bptt.task_loss + cfg.lambda * batch_penalty;
      if (!std::isfinite(total)) {
        result.diverged = true;
        result.note = "loss became non-finite";
        return result;
      }
      epoch_task += bptt.task_loss;
      ++batches;

      ++adam_step;
      const double correction1 = 1.0 - std::pow(kAdamBeta1, adam_step);
      const double correction2 = 1.0 - std::pow(kAdamBeta2, adam_step);
      visit_params4(result.params, grads, adam_m, adam_v,
                    [&](auto& theta, auto& grad, auto& m, auto& v) {
                      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
                      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
                      const auto m_hat = m / correction1;
                      const auto v_hat = v / correction2;
                      theta -= lr *
                               (m_hat.array() / (v_hat.array().sqrt() + kAdamEps))
                                   .matrix();
                    });
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.task_loss = epoch_task / static_cast<double>(batches);
    stats.penalty = safe_penalty(result.params, cfg.k, cfg.epsilon);
    stats.total = stats.task_loss + cfg.lambda * stats.penalty;
    stats.val_mae = validation_mae(result.params, dataset.validation, cfg.warmup_discard);
    stats.learning_rate = lr;
    result.history.push_back(stats);

    if (!std::isfinite(stats.val_mae)) {
      result.diverged = true;
      result.note = "validation loss became non-finite";
      return result;
    }

    // The plateau monitor sees the validation analogue of the training
    // objective; the penalty term is data-independent, so it is added as-is.
    // While the penalty is still descending the monitor keeps improving and
    // the rate stays up; once it reaches zero, a stagnant validation error
    // triggers the decay, which also settles the hinge boundary.
    const double monitored =
        cfg.lambda > 0.0 && std::isfinite(stats.penalty)
            ? stats.val_mae + cfg.lambda * stats.penalty
            : stats.val_mae;
    if (monitored < best_monitored * (1.0 - kPlateauRelThreshold)) {
      best_monitored = monitored;
      plateau_wait = 0;
    } else {
      ++plateau_wait;
      if (plateau_wait > kPlateauPatience) {
        lr *= kPlateauFactor;
        plateau_wait = 0;
      }
    }
  }
  return result;
}

LstmParams init_lstm_params(Eigen::Index n_x, Eigen::Index n_c, Eigen::Index n_y,
                            double x_max, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(n_c));
  CounterRng rng(seed, "init");
  LstmParams params = LstmParams::zeros(n_x, n_c, n_y, 1, x_max);
  visit_params(params, [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        t(r, c) = rng.uniform(-bound, bound);
      }
    }
  });
  return params;
}

std::vector<Window> make_windows(const Matrix& inputs, const Matrix& targets,
                                 int window_length, int window_step) {
  if (inputs.cols() != targets.cols()) {
    throw std::invalid_argument("make_windows: length mismatch");
  }
  if (window_length <= 0 || window_step <= 0) {
    throw std::invalid_argument("make_windows: window_length and window_step must be positive");
  }
  std::vector<Window> windows;
  for (Eigen::Index start = 0; start + window_length <= inputs.cols();
       start += window_step) {
    Window w;
    w.inputs = inputs.middleCols(start, window_length);
    w.targets = targets.middleCols(start, window_length);
    windows.push_back(std::move(w));
  }
  if (windows.empty()) throw std::invalid_argument("make_windows: series shorter than window");
  return windows;
}

}  // namespace rlstm
