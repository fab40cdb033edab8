// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ringmaster/sim.hpp"

namespace ringmaster {

/// Per-gradient computation times in seconds, sorted ascending.
struct FixedTimes {
  std::vector<double> taus;
};

/// Sorts and validates arbitrary positive times.
[[nodiscard]] FixedTimes make_fixed_times(std::vector<double> taus);

struct RateBreakpoint {
  double time = 0.0;
  double rate = 0.0;
};

/// Piecewise-constant gradient rate per worker. Each worker's first breakpoint is
/// at t = 0 and the last segment extends to infinity.
struct RateFunctions {
  std::vector<std::vector<RateBreakpoint>> workers;
};

/// p_i = 1 / tau_i for all t.
[[nodiscard]] RateFunctions constant_rates(std::span<const double> taus);
void validate(const RateFunctions& rf);

/// Integral of p_i over [t1, t2].
[[nodiscard]] double integrate_rate(const RateFunctions& rf, std::size_t worker, double t1, double t2);
/// Gradients finished by worker i inside [t1, t2]: floor of the rate integral.
[[nodiscard]] std::int64_t completed_gradients(const RateFunctions& rf, std::size_t worker, double t1, double t2);

/// H_m for m = 1..n.
[[nodiscard]] std::vector<double> harmonic_prefix(const FixedTimes& ft);

/// 2 min_m H_m (1 + R/m).
[[nodiscard]] double t_fixed(std::int64_t R, const FixedTimes& ft);

/// ceil(K/R) t(R).
[[nodiscard]] double total_time_fixed(std::int64_t K, std::int64_t R, const FixedTimes& ft);

struct SqrtBlock {
  std::int64_t r = 0;
  std::int64_t size = 0;   ///< number of iterations k < K whose threshold floors to r
  std::int64_t count = 0;  ///< ceil(size / r)
};

/// Groups k = 0..K-1 by floor of the square-root threshold (R_0 = 1).
[[nodiscard]] std::vector<SqrtBlock> sqrt_blocks(std::int64_t K);

/// Sum over blocks of count * t(r).
[[nodiscard]] double sqrt_time_bound(std::int64_t K, const FixedTimes& ft);

/// Smallest t with sum_i floor(1/4 * integral of p_i over [T0, T0 + t]) >= R.
/// Throws Unreachable when the rates can never accumulate R.
[[nodiscard]] double t_universal(std::int64_t R, double T0, const RateFunctions& rf);

/// T_{ceil(K/R)} for T_k = T_{k-1} + t(R; T_{k-1}), T_0 = 0.
[[nodiscard]] double recursion_fixed_universal(std::int64_t K, std::int64_t R, const RateFunctions& rf);

/// Thresholds max(1, ceil((j-1)/3)) for j = 1..3 floor(sqrt K) + 1.
[[nodiscard]] std::vector<std::int64_t> sqrt_recursion_thresholds(std::int64_t K);

/// S_J for S_j = S_{j-1} + t(threshold_j; S_{j-1}), S_0 = 0.
[[nodiscard]] double recursion_sqrt_universal(std::int64_t K, const RateFunctions& rf);

struct WindowReport {
  std::int64_t windows = 0;
  double bound = 0.0;          ///< t(R)
  double max_duration = 0.0;
  double max_ratio = 0.0;
  bool pass = true;
  /// Window with the largest ratio: covers accepted updates first..first+R-1 (1-based).
  std::int64_t worst_first = 0;
  double worst_start = 0.0;
  double worst_end = 0.0;
};

/// Every R consecutive accepted updates j..j+R-1 are timed from the (j-1)-th
/// accepted update (time 0 for j = 1) to the (j+R-1)-th.
[[nodiscard]] WindowReport verify_window_bound(std::span<const TraceRow> trace, std::int64_t R, const FixedTimes& ft);

}  // namespace ringmaster
