#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlstm/lstm.hpp"

namespace rlstm {

struct TrainConfig {
  double lambda = 0.0;    // penalty weight
  double epsilon = 0.3;   // resilience margin, in [0, 0.5]
  int k = 0;              // invariant-set index used inside the penalty
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 64;
  int window_length = 200;
  int window_step = 10;
  int warmup_discard = 10;  // steps excluded from the task loss
  std::uint64_t seed = 0;
  // Adam (0.9, 0.999, 1e-8) and ReduceLROnPlateau (factor 0.1, patience 10)
  // are fixed.
};

struct LossBreakdown {
  double task_loss = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double task_loss = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  double val_mae = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  LstmParams params;
  std::vector<EpochStats> history;
  bool diverged = false;
  std::string note;
};

// One training sample: inputs are n_x x T, targets n_y x T; target column t
// is compared against the readout produced after consuming input column t.
struct Window {
  Matrix inputs;
  Matrix targets;
};

struct SequenceDataset {
  std::vector<Window> train;
  std::vector<Window> validation;
};

// Hinge penalty sum_l max{rho(A_s^(l)(k)) - 1 + epsilon, 0}.
double penalty(const LstmParams& params, int k, double epsilon);

// Exact subgradient of the hinge penalty with respect to every weight and
// bias: closed-form d rho of the 2x2 quadratic formula, d||M||_2 = u1 v1ᵀ
// from the dominant singular pair, and the unrolled bound recursion of
// depth k+1. Zero on the hinge's inactive side.
std::vector<LstmLayerParams> penalty_gradient(const LstmParams& params, int k,
                                              double epsilon);

struct BpttResult {
  LstmParams gradients;  // same shapes as the model; x_max is unused
  double task_loss = 0.0;
};

// Exact gradient of the mean absolute error over the non-discarded steps of
// a window batch, by full backpropagation through time. Single layer only.
BpttResult bptt_gradient(const LstmParams& params, const std::vector<Window>& batch,
                         int warmup_discard);

// Mean absolute error over steps >= discard, averaged over windows, steps
// and output channels.
double mae(const std::vector<Matrix>& pred, const std::vector<Matrix>& target,
           int discard);

TrainResult train(const LstmParams& params0, const SequenceDataset& dataset,
                  const TrainConfig& cfg);

// Uniform (-1/sqrt(n_c), 1/sqrt(n_c)) initialization for all weights and
// biases, single layer plus readout.
LstmParams init_lstm_params(Eigen::Index n_x, Eigen::Index n_c, Eigen::Index n_y,
                            double x_max, std::uint64_t seed);

// Slices a (inputs, targets) pair of column-major time series into windows.
std::vector<Window> make_windows(const Matrix& inputs, const Matrix& targets,
                                 int window_length, int window_step);

}  // namespace rlstm
