#include "rlstm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "rlstm/rng.hpp"

namespace rlstm {

namespace {

template <class Fn>
void parallel_cells(int n, Fn&& fn) {
  const int workers = std::min(grid_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean_a = 0, mean_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0, var_a = 0, var_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - mean_a) * (b[i] - mean_b);
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    var_b += (b[i] - mean_b) * (b[i] - mean_b);
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0;
  return cov / std::sqrt(var_a * var_b);
}

Certificate certify_guarded(const LstmParams& params, int k, bool* ok) {
  try {
    Certificate cert = certify(params, k);
    *ok = true;
    return cert;
  } catch (const std::exception&) {
    *ok = false;
    Certificate cert;
    cert.k = k;
    cert.verdict = false;
    return cert;
  }
}

}  // namespace

int grid_threads() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  if (const char* env = std::getenv("LSTM_RESILIENCE_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = std::min(cap, requested);
  }
  return cap;
}

LstmParams sample_simplified_model(std::uint64_t seed, int index) {
  CounterRng rng(seed, "simplified-model-" + std::to_string(index));
  LstmParams p = LstmParams::zeros(1, 1, 1, 1, 1.0);
  auto& l = p.layers[0];
  l.W_f(0, 0) = rng.uniform(0.0, 0.1);
  l.W_i(0, 0) = rng.uniform(0.0, 0.1);
  l.W_c(0, 0) = rng.uniform(0.0, 0.1);
  l.W_o(0, 0) = rng.uniform(0.0, 0.1);
  l.U_f(0, 0) = rng.uniform(0.0, 1.0);
  l.U_i(0, 0) = rng.uniform(0.0, 1.0);
  l.U_c(0, 0) = rng.uniform(0.0, 1.0);
  l.U_o(0, 0) = rng.uniform(0.0, 1.0);
  l.b_f(0) = rng.uniform(0.0, 1.0);
  l.b_i(0) = rng.uniform(0.0, 1.0);
  l.b_c(0) = rng.uniform(0.0, 1.0);
  l.b_o(0) = rng.uniform(0.0, 1.0);
  p.U_y(0, 0) = rng.uniform(0.0, 1.0);
  p.b_y(0) = rng.uniform(0.0, 1.0);
  return p;
}

ExperimentOneResult run_experiment_one(const ExperimentOneConfig& cfg) {
  if (cfg.n_models < 1) throw std::invalid_argument("run_experiment_one: n_models < 1");
  if (cfg.t0 >= cfg.horizon) throw std::invalid_argument("run_experiment_one: t0 >= horizon");

  ExperimentOneResult result;
  result.config = cfg;
  result.rows.resize(cfg.n_models);

  parallel_cells(cfg.n_models, [&](int i) {
    const LstmParams params = sample_simplified_model(cfg.seed, i);
    ExperimentOneRow row;
    row.model_id = i;

    std::vector<Vector> xs(cfg.horizon, Vector::Constant(1, cfg.x_step));
    std::vector<Vector> xs_hat = xs;
    xs_hat[cfg.t0] = Vector::Constant(1, cfg.x_spike);

    const LstmState s0 = zero_state(params);
    const Trace nominal = simulate(params, s0, xs);
    const Trace perturbed = simulate(params, s0, xs_hat);

    RecoveryConfig rc;
    rc.e = cfg.e;
    rc.t0 = cfg.t0;
    rc.cap = cfg.cap;
    row.t_r = empirical_recovery_time(nominal.outputs, perturbed.outputs, rc);

    row.t_bar.reserve(cfg.k_max + 1);
    for (int k = 0; k <= cfg.k_max; ++k) {
      const Certificate cert = certify(params, k);
      if (k == 0) {
        row.rho_k0 = cert.layers[0].rho;
        row.certified_k0 = cert.verdict;
      }
      if (k == cfg.k_max) {
        row.rho_k_max = cert.layers[0].rho;
        row.certified_k_max = cert.verdict;
      }
      RecoveryConfig bc;
      bc.e = cfg.e;
      bc.cap = cfg.cap;
      bc.k = k;
      row.t_bar.push_back(bound_recovery_time(params, cert, bc));
    }
    result.rows[i] = std::move(row);
  });

  auto& summary = result.summary;
  summary.mean_estimation_error.assign(cfg.k_max + 1, 0.0);
  summary.correlation.assign(cfg.k_max + 1, 0.0);
  std::vector<double> empirical;
  empirical.reserve(cfg.n_models);
  for (const auto& row : result.rows) {
    empirical.push_back(static_cast<double>(row.t_r.value_or(cfg.cap)));
    summary.mean_rho_reduction +=
        (row.rho_k0 - row.rho_k_max) / row.rho_k0 / cfg.n_models;
  }
  for (int k = 0; k <= cfg.k_max; ++k) {
    std::vector<double> bound;
    bound.reserve(cfg.n_models);
    double err = 0.0;
    for (const auto& row : result.rows) {
      const double b = static_cast<double>(row.t_bar[k].value_or(cfg.cap));
      bound.push_back(b);
      err += std::abs(b - static_cast<double>(row.t_r.value_or(cfg.cap)));
    }
    summary.mean_estimation_error[k] = err / cfg.n_models;
    summary.correlation[k] = pearson(bound, empirical);
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

DatasetSpec tank_spec(int length, double noise, std::uint64_t seed) {
  DatasetSpec spec;
  spec.length = length;
  spec.noise_std = noise;
  spec.seed = seed;
  return spec;
}

std::vector<OutputRange> output_ranges(const DatasetSpec& spec) {
  return {{spec.y_min[0], spec.y_max[0]}, {spec.y_min[1], spec.y_max[1]}};
}

SequenceDataset windows_from_series(const Matrix& x_norm, const Matrix& y_norm,
                                    int window_length, int window_step) {
  const Eigen::Index half = x_norm.cols() / 2;
  SequenceDataset ds;
  ds.train = make_windows(x_norm.leftCols(half), y_norm.leftCols(half),
                          window_length, window_step);
  ds.validation = make_windows(x_norm.rightCols(x_norm.cols() - half),
                               y_norm.rightCols(y_norm.cols() - half),
                               window_length, window_length);
  return ds;
}

struct TwoTankEval {
  std::vector<Window> test_windows;          // normalized inputs and targets
  std::vector<Vector> nominal_inputs;        // normalized evaluation trace
  DatasetSpec spec;                          // normalization bounds
  Matrix eval_x_raw;                         // original-units evaluation trace
};

std::vector<Vector> columns_of(const Matrix& m) {
  std::vector<Vector> cols;
  cols.reserve(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(m.col(c));
  return cols;
}

// Noise-free constant-control trace used for the recovery measurement.
Matrix eval_trace_raw(const TankParams& tank, double u, int horizon) {
  Matrix x(3, horizon);
  TankState state{0.0, 0.0};
  for (int t = 0; t < horizon; ++t) {
    x(0, t) = u;
    x(1, t) = state.h1;
    x(2, t) = state.h2;
    state = rk4_step(tank, state, u);
  }
  return x;
}

TwoTankEval make_twotank_eval(int dataset_length, double test_noise,
                              std::uint64_t data_seed, double eval_u,
                              int eval_horizon) {
  const TankParams tank;
  TwoTankEval eval;
  eval.spec = tank_spec(dataset_length, test_noise, data_seed + 1);
  const TankDataset test = generate_dataset(eval.spec, tank);
  // Accuracy is scored over the whole test series with a single warmup
  // discard, so slow-memory models are not judged inside their transient.
  eval.test_windows =
      make_windows(test.x_norm, test.y_norm, dataset_length, dataset_length);
  eval.eval_x_raw = eval_trace_raw(tank, eval_u, eval_horizon);
  eval.nominal_inputs = columns_of(normalize_columns(
      eval.eval_x_raw, eval.spec.x_min.data(), eval.spec.x_max.data()));
  return eval;
}

double test_mae_denormalized(const LstmParams& params, const TwoTankEval& eval,
                             int discard) {
  std::vector<Matrix> preds, targets;
  preds.reserve(eval.test_windows.size());
  targets.reserve(eval.test_windows.size());
  for (const auto& w : eval.test_windows) {
    const Trace trace = simulate(params, zero_state(params), columns_of(w.inputs));
    Matrix pred(params.output_size(), w.inputs.cols());
    for (Eigen::Index t = 0; t < w.inputs.cols(); ++t) {
      pred.col(t) = trace.outputs[t + 1];  // readout after consuming column t
    }
    preds.push_back(denormalize_columns(pred, eval.spec.y_min.data(),
                                        eval.spec.y_max.data()));
    targets.push_back(denormalize_columns(w.targets, eval.spec.y_min.data(),
                                          eval.spec.y_max.data()));
  }
  return mae(preds, targets, discard);
}

struct RecoveryEval {
  RecoveryResult t_r;
  double max_deviation = 0.0;  // max_t of the channelwise deviation, original units
};

RecoveryEval measure_recovery(const LstmParams& params, const TwoTankEval& eval,
                              double offset, int perturb_lo, int perturb_hi,
                              double e, int t0) {
  const Matrix x_hat_raw =
      make_perturbed_input(eval.eval_x_raw, offset, perturb_lo, perturb_hi);
  const std::vector<Vector> perturbed = columns_of(normalize_columns(
      x_hat_raw, eval.spec.x_min.data(), eval.spec.x_max.data()));

  const LstmState s0 = zero_state(params);
  const Trace nominal = simulate(params, s0, eval.nominal_inputs);
  const Trace hat = simulate(params, s0, perturbed);

  std::vector<Vector> y_nom, y_hat;
  y_nom.reserve(nominal.outputs.size());
  y_hat.reserve(hat.outputs.size());
  RecoveryEval out;
  for (std::size_t t = 0; t < nominal.outputs.size(); ++t) {
    Vector a(2), b(2);
    for (int j = 0; j < 2; ++j) {
      a(j) = denormalize(nominal.outputs[t](j), eval.spec.y_min[j], eval.spec.y_max[j]);
      b(j) = denormalize(hat.outputs[t](j), eval.spec.y_min[j], eval.spec.y_max[j]);
    }
    out.max_deviation = std::max(out.max_deviation, (a - b).cwiseAbs().maxCoeff());
    y_nom.push_back(std::move(a));
    y_hat.push_back(std::move(b));
  }
  RecoveryConfig rc;
  rc.e = e;
  rc.t0 = t0;
  out.t_r = empirical_recovery_time(y_nom, y_hat, rc);
  return out;
}

RecoveryResult bound_at(const LstmParams& params, int k, double e, int cap,
                        const std::vector<OutputRange>& ranges, double* rho,
                        bool* certified) {
  bool ok = false;
  const Certificate cert = certify_guarded(params, k, &ok);
  if (!ok) {
    *rho = std::numeric_limits<double>::infinity();
    *certified = false;
    RecoveryResult r;
    r.kind = RecoveryResult::Kind::bound;
    r.note = "certification failed (degenerate bound recursion)";
    return r;
  }
  double worst = 0.0;
  for (const auto& layer : cert.layers) worst = std::max(worst, layer.rho);
  *rho = worst;
  *certified = cert.verdict;
  RecoveryConfig rc;
  rc.e = e;
  rc.cap = cap;
  rc.k = k;
  rc.output_range = ranges;
  return bound_recovery_time(params, cert, rc);
}

}  // namespace

ExperimentTwoResult run_experiment_two(const ExperimentTwoConfig& cfg) {
  const TankParams tank;
  const DatasetSpec train_spec =
      tank_spec(cfg.dataset_length, cfg.train_noise, cfg.data_seed);
  const TankDataset train_data = generate_dataset(train_spec, tank);
  const SequenceDataset dataset = windows_from_series(
      train_data.x_norm, train_data.y_norm, cfg.train.window_length,
      cfg.train.window_step);
  const TwoTankEval eval =
      make_twotank_eval(cfg.dataset_length, cfg.test_noise, cfg.data_seed,
                        cfg.eval_u, cfg.eval_horizon);
  const std::vector<OutputRange> ranges = output_ranges(eval.spec);

  struct CellSpec {
    bool baseline;
    double epsilon;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  if (cfg.include_baseline) {
    for (const auto seed : cfg.seeds) specs.push_back({true, 0.0, seed});
  }
  for (const double eps : cfg.epsilons) {
    for (const auto seed : cfg.seeds) specs.push_back({false, eps, seed});
  }

  ExperimentTwoResult result;
  result.config = cfg;
  result.cells.resize(specs.size());

  parallel_cells(static_cast<int>(specs.size()), [&](int i) {
    const CellSpec& spec = specs[i];
    ExperimentTwoCell cell;
    cell.baseline = spec.baseline;
    cell.epsilon = spec.epsilon;
    cell.seed = spec.seed;

    TrainConfig tc = cfg.train;
    tc.lambda = spec.baseline ? 0.0 : cfg.lambda;
    tc.epsilon = spec.epsilon;
    tc.seed = spec.seed;

    const LstmParams params0 =
        init_lstm_params(3, cfg.n_c, 2, 1.0, spec.seed * 7919u + 17u);
    const TrainResult trained = train(params0, dataset, tc);
    cell.diverged = trained.diverged;
    cell.note = trained.note;
    if (!trained.history.empty()) {
      cell.final_penalty = trained.history.back().penalty;
    }
    if (!trained.diverged) {
      cell.test_mae =
          test_mae_denormalized(trained.params, eval, cfg.train.warmup_discard);
      const RecoveryEval rec =
          measure_recovery(trained.params, eval, cfg.perturb_offset,
                           cfg.perturb_lo, cfg.perturb_hi, cfg.e, cfg.t0);
      cell.t_r = rec.t_r;
      cell.t_bar_0 = bound_at(trained.params, 0, cfg.e, cfg.bound_cap, ranges,
                              &cell.rho_k0, &cell.certified_k0);
      bool certified_k = false;
      cell.t_bar_k = bound_at(trained.params, cfg.k_report, cfg.e, cfg.bound_cap,
                              ranges, &cell.rho_k_report, &certified_k);
    }
    result.cells[i] = std::move(cell);
  });
  return result;
}

PulseCompareResult run_pulse_compare(const PulseCompareConfig& cfg) {
  const TankParams tank;
  const DatasetSpec train_spec =
      tank_spec(cfg.dataset_length, cfg.train_noise, cfg.data_seed);
  const TankDataset train_data = generate_dataset(train_spec, tank);
  const TwoTankEval eval =
      make_twotank_eval(cfg.dataset_length, cfg.test_noise, cfg.data_seed,
                        cfg.eval_u, cfg.eval_horizon);
  const std::vector<OutputRange> ranges = output_ranges(eval.spec);

  struct RowSpec {
    std::string label;
    double lambda;
    double epsilon;
    double pulse_amplitude;  // 0 disables augmentation
  };
  std::vector<RowSpec> specs;
  specs.push_back({"baseline", 0.0, 0.0, 0.0});
  for (const double m : cfg.dd_pulse_amplitudes) {
    specs.push_back({"dd_pulse_" + std::to_string(static_cast<int>(m)), 0.0, 0.0, m});
  }
  specs.push_back({"penalized", cfg.lambda, cfg.epsilon, 0.0});

  PulseCompareResult result;
  result.config = cfg;
  result.rows.resize(specs.size());

  parallel_cells(static_cast<int>(specs.size()), [&](int i) {
    const RowSpec& spec = specs[i];
    PulseCompareRow row;
    row.label = spec.label;

    Matrix x_norm = train_data.x_norm;
    if (spec.pulse_amplitude > 0.0) {
      PulseSpec pulses;
      pulses.rate = cfg.pulse_rate;
      pulses.duration = cfg.pulse_duration;
      pulses.max_amplitude = spec.pulse_amplitude;
      pulses.seed = cfg.seed + static_cast<std::uint64_t>(i);
      const Matrix pulsed = inject_pulses(train_data.x, pulses);
      x_norm = normalize_columns(pulsed, train_spec.x_min.data(),
                                 train_spec.x_max.data());
    }
    const SequenceDataset dataset = windows_from_series(
        x_norm, train_data.y_norm, cfg.train.window_length, cfg.train.window_step);

    TrainConfig tc = cfg.train;
    tc.lambda = spec.lambda;
    tc.epsilon = spec.epsilon;
    tc.seed = cfg.seed;

    const LstmParams params0 = init_lstm_params(3, cfg.n_c, 2, 1.0, cfg.seed);
    const TrainResult trained = train(params0, dataset, tc);
    row.diverged = trained.diverged;
    row.note = trained.note;
    if (!trained.diverged) {
      row.mae = test_mae_denormalized(trained.params, eval, cfg.train.warmup_discard);
      for (const double offset : cfg.offsets) {
        const RecoveryEval rec =
            measure_recovery(trained.params, eval, offset, cfg.perturb_lo,
                             cfg.perturb_hi, cfg.e, cfg.t0);
        row.t_r.push_back(rec.t_r);
        row.max_deviation.push_back(rec.max_deviation);
      }
      bool certified0 = false;
      double rho0 = 0.0;
      bound_at(trained.params, 0, cfg.e, cfg.bound_cap, ranges, &rho0, &certified0);
      row.rho_k0 = rho0;
      row.t_bar = bound_at(trained.params, cfg.k_report, cfg.e, cfg.bound_cap,
                           ranges, &row.rho_k_report, &row.certified);
    }
    result.rows[i] = std::move(row);
  });
  return result;
}

}  // namespace rlstm
