// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/timebounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "ringmaster/error.hpp"
#include "ringmaster/schedules.hpp"

namespace ringmaster {
namespace {

void validate(const FixedTimes& ft) {
  require(!ft.taus.empty(), ErrorKind::InvalidInput, "need at least one worker time");
  for (std::size_t i = 0; i < ft.taus.size(); ++i) {
    require(std::isfinite(ft.taus[i]) && ft.taus[i] > 0.0, ErrorKind::InvalidInput, "worker times must be positive");
    require(i == 0 || ft.taus[i - 1] <= ft.taus[i], ErrorKind::InvalidInput, "worker times must be sorted");
  }
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Walks one worker's cumulative integral from T0 and reports the times at
// which it reaches 4, 8, 12, ...
class CrossingCursor {
 public:
  CrossingCursor(const std::vector<RateBreakpoint>& bp, double t0) : bp_(bp), now_(t0) {
    while (seg_ + 1 < bp_.size() && bp_[seg_ + 1].time <= t0) ++seg_;
  }

  // Absolute time of the next crossing, or +inf if it never happens.
  double next() {
    target_ += 4.0;
    while (true) {
      const double rate = bp_[seg_].rate;
      const bool last = seg_ + 1 == bp_.size();
      const double end = last ? std::numeric_limits<double>::infinity() : bp_[seg_ + 1].time;
      if (rate > 0.0) {
        const double hit = now_ + (target_ - cum_) / rate;
        if (hit <= end) return hit;
      }
      if (last) return std::numeric_limits<double>::infinity();
      cum_ += rate * (end - now_);
      now_ = end;
      ++seg_;
    }
  }

 private:
  const std::vector<RateBreakpoint>& bp_;
  std::size_t seg_ = 0;
  double now_;
  double cum_ = 0.0;
  double target_ = 0.0;
};

}  // namespace

FixedTimes make_fixed_times(std::vector<double> taus) {
  std::sort(taus.begin(), taus.end());
  FixedTimes ft{std::move(taus)};
  validate(ft);
  return ft;
}

RateFunctions constant_rates(std::span<const double> taus) {
  RateFunctions rf;
  for (double tau : taus) {
    require(std::isfinite(tau) && tau > 0.0, ErrorKind::InvalidInput, "worker times must be positive");
    rf.workers.push_back({RateBreakpoint{0.0, 1.0 / tau}});
  }
  validate(rf);
  return rf;
}

void validate(const RateFunctions& rf) {
  require(!rf.workers.empty(), ErrorKind::InvalidInput, "need at least one worker");
  for (const auto& bp : rf.workers) {
    require(!bp.empty() && bp.front().time == 0.0, ErrorKind::InvalidInput, "rates must start at time 0");
    for (std::size_t s = 0; s < bp.size(); ++s) {
      require(std::isfinite(bp[s].rate) && bp[s].rate >= 0.0, ErrorKind::InvalidInput,
              "rates must be finite and >= 0");
      require(std::isfinite(bp[s].time), ErrorKind::InvalidInput, "breakpoints must be finite");
      require(s == 0 || bp[s - 1].time < bp[s].time, ErrorKind::InvalidInput,
              "breakpoints must be strictly increasing");
    }
  }
}

double integrate_rate(const RateFunctions& rf, std::size_t worker, double t1, double t2) {
  require(worker < rf.workers.size(), ErrorKind::InvalidInput, "worker index out of range");
  require(t1 >= 0.0 && t1 <= t2, ErrorKind::InvalidInput, "need 0 <= t1 <= t2");
  const auto& bp = rf.workers[worker];
  double total = 0.0;
  for (std::size_t s = 0; s < bp.size(); ++s) {
    const double lo = std::max(t1, bp[s].time);
    const double hi = s + 1 < bp.size() ? std::min(t2, bp[s + 1].time) : t2;
    if (hi > lo) total += bp[s].rate * (hi - lo);
  }
  return total;
}

std::int64_t completed_gradients(const RateFunctions& rf, std::size_t worker, double t1, double t2) {
  return static_cast<std::int64_t>(std::floor(integrate_rate(rf, worker, t1, t2)));
}

std::vector<double> harmonic_prefix(const FixedTimes& ft) {
  validate(ft);
  std::vector<double> h(ft.taus.size());
  double inv_sum = 0.0;
  for (std::size_t m = 0; m < ft.taus.size(); ++m) {
    inv_sum += 1.0 / ft.taus[m];
    h[m] = static_cast<double>(m + 1) / inv_sum;
  }
  return h;
}

double t_fixed(std::int64_t R, const FixedTimes& ft) {
  require(R >= 1, ErrorKind::InvalidInput, "R must be >= 1");
  const std::vector<double> h = harmonic_prefix(ft);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m <= h.size(); ++m) {
    best = std::min(best, h[m - 1] * (1.0 + static_cast<double>(R) / static_cast<double>(m)));
  }
  return 2.0 * best;
}

double total_time_fixed(std::int64_t K, std::int64_t R, const FixedTimes& ft) {
  require(K >= 1, ErrorKind::InvalidInput, "K must be >= 1");
  return static_cast<double>(ceil_div(K, R)) * t_fixed(R, ft);
}

std::vector<SqrtBlock> sqrt_blocks(std::int64_t K) {
  require(K >= 1, ErrorKind::InvalidInput, "K must be >= 1");
  std::vector<SqrtBlock> blocks;
  for (std::int64_t r = 1;; ++r) {
    // k = 0 joins r = 1 because R_0 = 1.
    const std::int64_t lo = r == 1 ? 0 : r * r;
    if (lo >= K) break;
    const std::int64_t hi = std::min(K, (r + 1) * (r + 1));
    blocks.push_back(SqrtBlock{r, hi - lo, ceil_div(hi - lo, r)});
  }
  return blocks;
}

double sqrt_time_bound(std::int64_t K, const FixedTimes& ft) {
  double total = 0.0;
  for (const auto& b : sqrt_blocks(K)) total += static_cast<double>(b.count) * t_fixed(b.r, ft);
  return total;
}

double t_universal(std::int64_t R, double T0, const RateFunctions& rf) {
  require(R >= 1, ErrorKind::InvalidInput, "R must be >= 1");
  require(std::isfinite(T0) && T0 >= 0.0, ErrorKind::InvalidInput, "start time must be >= 0");
  validate(rf);

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<CrossingCursor> cursors;
  cursors.reserve(rf.workers.size());
  for (std::size_t i = 0; i < rf.workers.size(); ++i) {
    cursors.emplace_back(rf.workers[i], T0);
    const double t = cursors[i].next();
    if (std::isfinite(t)) heap.emplace(t, i);
  }
  double t = T0;
  for (std::int64_t done = 0; done < R; ++done) {
    if (heap.empty()) throw Error(ErrorKind::Unreachable, "rates never accumulate R gradients");
    const auto [when, i] = heap.top();
    heap.pop();
    t = when;
    const double again = cursors[i].next();
    if (std::isfinite(again)) heap.emplace(again, i);
  }
  return t - T0;
}

double recursion_fixed_universal(std::int64_t K, std::int64_t R, const RateFunctions& rf) {
  require(K >= 1 && R >= 1, ErrorKind::InvalidInput, "K and R must be >= 1");
  double T = 0.0;
  for (std::int64_t k = 0; k < ceil_div(K, R); ++k) T += t_universal(R, T, rf);
  return T;
}

std::vector<std::int64_t> sqrt_recursion_thresholds(std::int64_t K) {
  require(K >= 1, ErrorKind::InvalidInput, "K must be >= 1");
  const std::int64_t steps = 3 * isqrt(K) + 1;
  std::vector<std::int64_t> r(static_cast<std::size_t>(steps));
  for (std::int64_t j = 1; j <= steps; ++j) r[static_cast<std::size_t>(j - 1)] = std::max<std::int64_t>(1, ceil_div(j - 1, 3));
  return r;
}

double recursion_sqrt_universal(std::int64_t K, const RateFunctions& rf) {
  double S = 0.0;
  for (std::int64_t r : sqrt_recursion_thresholds(K)) S += t_universal(r, S, rf);
  return S;
}

WindowReport verify_window_bound(std::span<const TraceRow> trace, std::int64_t R, const FixedTimes& ft) {
  require(R >= 1, ErrorKind::InvalidInput, "R must be >= 1");
  WindowReport rep;
  rep.bound = t_fixed(R, ft);

  std::vector<double> accepted{0.0};
  double last_time = 0.0;
  for (const auto& row : trace) {
    require(row.sim_time_s >= last_time, ErrorKind::InvalidInput, "trace clock goes backwards");
    last_time = row.sim_time_s;
    require(row.accepted == (row.delay < R), ErrorKind::InvalidInput, "trace was not produced with this threshold");
    if (row.accepted) accepted.push_back(row.sim_time_s);
  }

  const auto n = static_cast<std::int64_t>(accepted.size()) - 1;
  for (std::int64_t j = 1; j + R - 1 <= n; ++j) {
    const double start = accepted[static_cast<std::size_t>(j - 1)];
    const double end = accepted[static_cast<std::size_t>(j + R - 1)];
    const double ratio = (end - start) / rep.bound;
    ++rep.windows;
    if (rep.windows == 1 || ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.max_duration = end - start;
      rep.worst_first = j;
      rep.worst_start = start;
      rep.worst_end = end;
    }
  }
  rep.pass = rep.max_ratio <= 1.0;
  return rep;
}

}  // namespace ringmaster
