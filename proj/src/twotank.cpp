#include "rlstm/twotank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlstm/rng.hpp"

namespace rlstm {

namespace {

double outflow(double g, double level) {
  return std::sqrt(2.0 * g * std::max(level, 0.0));
}

}  // namespace

std::pair<double, double> tank_derivative(const TankParams& params,
                                          const TankState& state, double u) {
  const double q1 = outflow(params.g, state.h1);
  const double q2 = outflow(params.g, state.h2);
  return {-params.p1 * q1 + params.p2 * u, params.p3 * q1 - params.p4 * q2};
}

TankState rk4_step(const TankParams& params, const TankState& state, double u) {
  const double dt = params.dt;
  const auto [k1a, k1b] = tank_derivative(params, state, u);
  const auto [k2a, k2b] = tank_derivative(
      params, {state.h1 + 0.5 * dt * k1a, state.h2 + 0.5 * dt * k1b}, u);
  const auto [k3a, k3b] = tank_derivative(
      params, {state.h1 + 0.5 * dt * k2a, state.h2 + 0.5 * dt * k2b}, u);
  const auto [k4a, k4b] =
      tank_derivative(params, {state.h1 + dt * k3a, state.h2 + dt * k3b}, u);
  TankState next;
  next.h1 = state.h1 + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
  next.h2 = state.h2 + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
  next.h1 = std::max(next.h1, 0.0);
  next.h2 = std::max(next.h2, 0.0);
  return next;
}

std::vector<double> generate_control(const DatasetSpec& spec, const TankParams& params) {
  if (spec.length <= 0) throw std::invalid_argument("generate_control: length <= 0");
  if (spec.switch_interval <= 0) {
    throw std::invalid_argument("generate_control: switch_interval <= 0");
  }
  CounterRng rng(spec.seed, "control");
  std::vector<double> u(spec.length);
  double level = 0.0;
  for (int t = 0; t < spec.length; ++t) {
    if (t % spec.switch_interval == 0) {
      level = rng.uniform(params.u_min, params.u_max);
    }
    u[t] = level;
  }
  return u;
}

TankDataset generate_dataset(const DatasetSpec& spec, const TankParams& params) {
  if (spec.noise_std < 0) throw std::invalid_argument("generate_dataset: negative noise_std");
  TankDataset ds;
  ds.spec = spec;

  const std::vector<double> u = generate_control(spec, params);
  ds.levels.resize(spec.length + 1);
  ds.levels[0] = TankState{0.0, 0.0};
  for (int t = 0; t < spec.length; ++t) {
    ds.levels[t + 1] = rk4_step(params, ds.levels[t], u[t]);
  }

  CounterRng noise(spec.seed, "noise");
  ds.x.resize(3, spec.length);
  ds.y.resize(2, spec.length);
  for (int t = 0; t < spec.length; ++t) {
    const double w1 = spec.noise_std > 0 ? noise.normal(0.0, spec.noise_std) : 0.0;
    const double w2 = spec.noise_std > 0 ? noise.normal(0.0, spec.noise_std) : 0.0;
    ds.x(0, t) = u[t];
    ds.x(1, t) = ds.levels[t].h1 + w1;
    ds.x(2, t) = ds.levels[t].h2 + w2;
    ds.y(0, t) = ds.levels[t + 1].h1;
    ds.y(1, t) = ds.levels[t + 1].h2;
  }
  ds.x_norm = normalize_columns(ds.x, spec.x_min.data(), spec.x_max.data());
  ds.y_norm = normalize_columns(ds.y, spec.y_min.data(), spec.y_max.data());
  return ds;
}

double normalize(double v, double lo, double hi) {
  if (hi <= lo) throw std::invalid_argument("normalize: hi <= lo");
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

double denormalize(double v, double lo, double hi) {
  if (hi <= lo) throw std::invalid_argument("denormalize: hi <= lo");
  return (v + 1.0) * (hi - lo) / 2.0 + lo;
}

Matrix normalize_columns(const Matrix& values, const double* lo, const double* hi) {
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out(r, c) = normalize(values(r, c), lo[r], hi[r]);
    }
  }
  return out;
}

Matrix denormalize_columns(const Matrix& values, const double* lo, const double* hi) {
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out(r, c) = denormalize(values(r, c), lo[r], hi[r]);
    }
  }
  return out;
}

Matrix make_perturbed_input(const Matrix& x, double offset, int win_lo, int win_hi) {
  if (x.rows() != 3) throw std::invalid_argument("make_perturbed_input: expected 3 rows");
  if (win_hi < win_lo || win_hi >= x.cols()) {
    throw std::invalid_argument("make_perturbed_input: window outside trace");
  }
  Matrix out = x;
  for (int t = win_lo; t <= win_hi; ++t) {
    out(1, t) += offset;
    out(2, t) += offset;
  }
  return out;
}

Matrix inject_pulses(const Matrix& x, const PulseSpec& spec) {
  if (x.rows() != 3) throw std::invalid_argument("inject_pulses: expected 3 rows");
  if (spec.duration < 1) throw std::invalid_argument("inject_pulses: duration < 1");
  if (spec.rate <= 0) throw std::invalid_argument("inject_pulses: rate must be positive");
  const long horizon = static_cast<long>(x.cols());
  if (horizon <= spec.duration) {
    throw std::invalid_argument("inject_pulses: trace shorter than pulse duration");
  }

  CounterRng rng(spec.seed, "pulses");
  const std::int64_t count = rng.poisson(spec.rate * static_cast<double>(horizon));
  Matrix out = x;
  for (std::int64_t p = 0; p < count; ++p) {
    const long start = rng.uniform_int(0, horizon - spec.duration);
    const double amplitude = rng.uniform(0.0, spec.max_amplitude);
    for (long t = start; t < start + spec.duration; ++t) {
      out(1, t) += amplitude;
      out(2, t) += amplitude;
    }
  }
  return out;
}

}  // namespace rlstm
