#include "rlstm/recovery.hpp"

#include <cmath>
#include <stdexcept>

namespace rlstm {

RecoveryResult empirical_recovery_time(const std::vector<Vector>& y_nominal,
                                       const std::vector<Vector>& y_perturbed,
                                       const RecoveryConfig& cfg) {
  if (y_nominal.size() != y_perturbed.size()) {
    throw std::invalid_argument("empirical_recovery_time: trace lengths differ");
  }
  if (y_nominal.empty()) {
    throw std::invalid_argument("empirical_recovery_time: empty traces");
  }
  if (cfg.t0 < 0 || cfg.t0 >= static_cast<int>(y_nominal.size())) {
    throw std::invalid_argument("empirical_recovery_time: t0 outside trace");
  }
  if (cfg.e <= 0.0) throw std::invalid_argument("empirical_recovery_time: e must be positive");

  const long n = static_cast<long>(y_nominal.size());
  long last_violation = -1;
  long first_ok = -1;
  double final_dev = 0.0;
  for (long t = 0; t < n; ++t) {
    const double dev = (y_nominal[t] - y_perturbed[t]).norm();
    if (dev > cfg.e) {
      last_violation = t;
    } else if (first_ok < 0) {
      first_ok = t;
    }
    if (t + 1 == n) final_dev = dev;
  }

  RecoveryResult result;
  result.kind = RecoveryResult::Kind::empirical;
  result.first_satisfaction = first_ok;
  result.final_deviation = final_dev;
  if (last_violation == n - 1) {
    result.note = "final sample still deviates";
    return result;
  }
  const long settled = std::max(last_violation + 1, static_cast<long>(cfg.t0));
  result.value = settled - cfg.t0;
  return result;
}

double rescale_tolerance(double e, const std::vector<OutputRange>& ranges) {
  if (ranges.empty()) throw std::invalid_argument("rescale_tolerance: no ranges");
  double widest = 0.0;
  for (const auto& r : ranges) {
    if (r.hi <= r.lo) throw std::invalid_argument("rescale_tolerance: max <= min");
    widest = std::max(widest, r.hi - r.lo);
  }
  return e / widest;
}

RecoveryResult bound_recovery_time(const LstmParams& params, const Certificate& cert,
                                   const RecoveryConfig& cfg) {
  params.validate();
  if (cfg.cap < 1) throw std::invalid_argument("bound_recovery_time: cap must be >= 1");
  if (cfg.e <= 0.0) throw std::invalid_argument("bound_recovery_time: e must be positive");

  RecoveryResult result;
  result.kind = RecoveryResult::Kind::bound;

  if (cert.u_y_norm == 0.0) {
    result.value = 0;
    result.first_satisfaction = 0;
    result.note = "||U_y|| = 0: output is constant";
    return result;
  }
  if (!cert.verdict) {
    result.note = "rho >= 1: no certified decay";
    return result;
  }

  const double e_eff =
      cfg.output_range ? rescale_tolerance(cfg.e, *cfg.output_range) : cfg.e;
  const double threshold = e_eff / cert.u_y_norm;

  std::vector<double> diameters;
  diameters.reserve(cert.layers.size());
  for (const auto& layer : cert.layers) {
    diameters.push_back(2.0 * std::sqrt(static_cast<double>(layer.n_c)) *
                        layer.s_bar);
  }

  long last_violation = -1;
  long first_ok = -1;
  double final_value = 0.0;
  for (long t = 0; t <= cfg.cap; ++t) {
    const double value = beta_tilde(diameters, t, cert);
    if (value > threshold) {
      last_violation = t;
    } else if (first_ok < 0) {
      first_ok = t;
    }
    if (t == cfg.cap) final_value = value;
  }

  result.first_satisfaction = first_ok;
  result.final_deviation = final_value;
  if (last_violation == cfg.cap) {
    result.note = "bound exceeds tolerance through the cap";
    return result;
  }
  result.value = std::max(last_violation + 1, 0L);
  return result;
}

std::vector<double> beta_bound_curve(const Certificate& cert, int t_max) {
  if (t_max < 0) throw std::invalid_argument("beta_bound_curve: t_max < 0");
  std::vector<double> diameters;
  diameters.reserve(cert.layers.size());
  for (const auto& layer : cert.layers) {
    diameters.push_back(2.0 * std::sqrt(static_cast<double>(layer.n_c)) *
                        layer.s_bar);
  }
  std::vector<double> curve;
  curve.reserve(t_max + 1);
  for (long t = 0; t <= t_max; ++t) {
    curve.push_back(beta_tilde(diameters, t, cert));
  }
  return curve;
}

}  // namespace rlstm
