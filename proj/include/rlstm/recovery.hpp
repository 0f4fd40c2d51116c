#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rlstm/stability.hpp"

namespace rlstm {

struct OutputRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct RecoveryConfig {
  double e = 0.01;  // output tolerance, original units
  int t0 = 0;       // first step after the input sequences re-coincide
  int cap = 100;    // search horizon for the bound
  int k = 0;        // invariant-set index
  // When present, e is rescaled by the largest per-output range before the
  // bound comparison (outputs are normalized, the tolerance is not).
  std::optional<std::vector<OutputRange>> output_range;
};

struct RecoveryResult {
  enum class Kind { empirical, bound };
  // Recovery time in steps, or empty when the trace/bound never settles.
  std::optional<long> value;
  Kind kind = Kind::empirical;
  long first_satisfaction = -1;  // first index with deviation below tolerance
  double final_deviation = 0.0;
  std::string note;

  bool unrecovered() const { return !value.has_value(); }
  long value_or(long cap) const { return value.value_or(cap); }
};

// Smallest t >= t0 with ||y_nominal(t') - y_perturbed(t')|| <= e for every
// t' from t to the end of the traces, minus t0; empty if even the final
// sample deviates.
RecoveryResult empirical_recovery_time(const std::vector<Vector>& y_nominal,
                                       const std::vector<Vector>& y_perturbed,
                                       const RecoveryConfig& cfg);

double rescale_tolerance(double e, const std::vector<OutputRange>& ranges);

// Data-independent bound: first t such that the decay envelope evaluated at
// the invariant-set diameter stays below e_eff / ||U_y|| through the cap.
RecoveryResult bound_recovery_time(const LstmParams& params, const Certificate& cert,
                                   const RecoveryConfig& cfg);

// beta_tilde(2 sqrt(n_c) s_bar(k), t; k) for t = 0..t_max.
std::vector<double> beta_bound_curve(const Certificate& cert, int t_max);

}  // namespace rlstm
