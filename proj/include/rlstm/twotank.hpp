#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rlstm/linalg.hpp"

namespace rlstm {

// Cascaded two-tank plant: the pump fills tank 1, which drains into tank 2.
//   dh1/dt = -p1 sqrt(2 g h1) + p2 u
//   dh2/dt =  p3 sqrt(2 g h1) - p4 sqrt(2 g h2)
struct TankParams {
  double p1 = 0.5, p2 = 0.5, p3 = 0.5, p4 = 0.5;
  double g = 0.5;
  double u_min = 0.5, u_max = 3.0;
  double dt = 0.01;
};

struct TankState {
  double h1 = 0.0;
  double h2 = 0.0;
};

struct DatasetSpec {
  int length = 10000;          // number of (x, y) samples
  int switch_interval = 4000;  // steps between control resamples
  double noise_std = 0.1;      // sensor noise on the level channels
  std::uint64_t seed = 0;
  std::array<double, 3> x_min{0.5, 0.0, 0.0};
  std::array<double, 3> x_max{3.0, 10.0, 10.0};
  std::array<double, 2> y_min{0.0, 0.0};
  std::array<double, 2> y_max{10.0, 10.0};
};

struct PulseSpec {
  double rate = 0.001;  // Poisson rate per step
  int duration = 10;
  double max_amplitude = 1.0;
  std::uint64_t seed = 0;
};

// Columns are time steps. x rows: (u, h1 + w1, h2 + w2); y rows: the clean
// next-step levels. *_norm are the [-1, 1]-normalized copies.
struct TankDataset {
  Matrix x;       // 3 x length
  Matrix y;       // 2 x length
  Matrix x_norm;  // 3 x length
  Matrix y_norm;  // 2 x length
  std::vector<TankState> levels;  // clean levels h(0..length)
  DatasetSpec spec;
};

// Right-hand side with levels clamped to zero before the square roots.
std::pair<double, double> tank_derivative(const TankParams& params,
                                          const TankState& state, double u);

// Classical 4th-order step; the result is clamped componentwise to >= 0.
TankState rk4_step(const TankParams& params, const TankState& state, double u);

// Piecewise-constant control, one uniform draw per switch interval.
std::vector<double> generate_control(const DatasetSpec& spec, const TankParams& params);

TankDataset generate_dataset(const DatasetSpec& spec, const TankParams& params);

double normalize(double v, double lo, double hi);
double denormalize(double v, double lo, double hi);

Matrix normalize_columns(const Matrix& values, const double* lo, const double* hi);
Matrix denormalize_columns(const Matrix& values, const double* lo, const double* hi);

// Adds `offset` to both level channels for steps win_lo..win_hi inclusive.
Matrix make_perturbed_input(const Matrix& x, double offset, int win_lo = 1000,
                            int win_hi = 1010);

// Adds Poisson-placed constant pulses to the level channels (rows 1 and 2).
Matrix inject_pulses(const Matrix& x, const PulseSpec& spec);

}  // namespace rlstm
