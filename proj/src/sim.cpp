// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "ringmaster/error.hpp"

namespace ringmaster {
namespace {

constexpr std::uint64_t kGradientStream = 1;
constexpr std::uint64_t kRuntimeStream = 2;

struct Arrival {
  double finish = 0.0;
  std::size_t worker = 0;
};

// Earliest finish first; ties go to the lower worker id.
struct LaterArrival {
  bool operator()(const Arrival& a, const Arrival& b) const {
    if (a.finish != b.finish) return a.finish > b.finish;
    return a.worker > b.worker;
  }
};

struct InFlight {
  std::int64_t computed_at = 0;
  double dispatched = 0.0;
  // Already past every future threshold; its snapshot has been released.
  bool doomed = false;
};

struct Snapshot {
  ParamVector x;
  std::vector<std::size_t> holders;
};

double step_size(const MethodConfig& method, std::int64_t k) {
  if (method.kind == MethodKind::RingmasterAgnostic) {
    return agnostic_eta(k, AgnosticSchedule{method.eta, method.agnostic_variant});
  }
  return method.eta;
}

void validate(const Objective& problem, const MethodConfig& method, const StopCondition& stop) {
  method.norm.validate(problem.layout());
  require(std::isfinite(method.eta) && method.eta > 0.0, ErrorKind::InvalidInput, "eta must be positive");
  if (method.kind == MethodKind::RingmasterFixed) {
    require(method.threshold >= 1, ErrorKind::InvalidInput, "delay threshold must be >= 1");
  }
  if (method.kind == MethodKind::Rennala) {
    require(method.batch >= 1, ErrorKind::InvalidInput, "batch size must be >= 1");
  }
  if (const auto* ema = std::get_if<MuonEma>(&method.momentum)) {
    require(ema->beta >= 0.0 && ema->beta < 1.0, ErrorKind::InvalidInput, "beta must lie in [0, 1)");
  } else {
    const auto& avg = std::get<TheoryAveraging>(method.momentum);
    require(avg.alpha_init > 0.0 && avg.alpha_init <= 1.0, ErrorKind::InvalidInput, "alpha_init must lie in (0, 1]");
    if (const auto* fixed = std::get_if<FixedAlpha>(&avg.alpha)) {
      require(fixed->alpha > 0.0 && fixed->alpha <= 1.0, ErrorKind::InvalidInput, "alpha must lie in (0, 1]");
    }
  }
  if (const auto* h = std::get_if<Horizon>(&stop)) {
    require(std::isfinite(h->seconds) && h->seconds > 0.0, ErrorKind::InvalidInput, "horizon must be positive");
  } else {
    require(std::get<MaxUpdates>(stop).K >= 1, ErrorKind::InvalidInput, "max updates must be >= 1");
  }
}

}  // namespace

std::vector<double> make_profile(ProfileKind kind, std::size_t n, double base_scale) {
  require(n >= 1, ErrorKind::InvalidInput, "profile needs at least one worker");
  require(kind != ProfileKind::Explicit, ErrorKind::InvalidInput, "explicit profiles carry their own times");
  if (kind != ProfileKind::GpuTable) {
    require(std::isfinite(base_scale) && base_scale > 0.0, ErrorKind::InvalidInput, "base scale must be positive");
  }
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = static_cast<double>(i);
    switch (kind) {
      case ProfileKind::Similar: times[i] = base_scale; break;
      case ProfileKind::Sublinear: times[i] = base_scale * (1.0 + std::sqrt(fi)); break;
      case ProfileKind::Linear: times[i] = base_scale * (1.0 + fi); break;
      case ProfileKind::GpuTable: times[i] = kGpuStepTimesMs[i % kGpuStepTimesMs.size()] / 1000.0; break;
      case ProfileKind::Explicit: break;
    }
  }
  return times;
}

std::vector<double> base_times(const WorkerProfile& profile) {
  if (profile.kind != ProfileKind::Explicit) return make_profile(profile.kind, profile.n, profile.base_scale);
  require(!profile.explicit_times.empty(), ErrorKind::InvalidInput, "profile needs at least one worker");
  for (double t : profile.explicit_times) {
    require(std::isfinite(t) && t > 0.0, ErrorKind::InvalidInput, "worker times must be positive");
  }
  return profile.explicit_times;
}

double sample_runtime(double base, double noise_frac, Rng& rng) {
  require(base > 0.0, ErrorKind::InvalidInput, "base runtime must be positive");
  require(noise_frac >= 0.0, ErrorKind::InvalidInput, "noise fraction must be >= 0");
  if (noise_frac == 0.0) return base;
  std::normal_distribution<double> normal(0.0, 1.0);
  return base + std::abs(normal(rng)) * noise_frac * base;
}

Rng derive_stream(std::uint64_t seed, std::uint64_t worker, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), static_cast<std::uint32_t>(worker >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

std::string_view to_string(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::RingmasterFixed: return "ringmaster_fixed";
    case MethodKind::RingmasterAgnostic: return "ringmaster_agnostic";
    case MethodKind::Synchronous: return "synchronous";
    case MethodKind::Rennala: return "rennala";
    case MethodKind::DelayAdaptive: return "delay_adaptive";
  }
  return "unknown";
}

Measurement measure(const Objective& problem, const ParamVector& x, const NormSpec& spec) {
  Measurement m;
  const double f = problem.value(x);
  m.loss = problem.optimal_value() ? f - *problem.optimal_value() : f;
  m.grad_dual_norm = dual_norm(problem.gradient(x), spec);
  return m;
}

std::int64_t threshold_at(const MethodConfig& method, std::int64_t k) {
  switch (method.kind) {
    case MethodKind::RingmasterFixed: return method.threshold;
    case MethodKind::RingmasterAgnostic: return agnostic_threshold(k);
    case MethodKind::Synchronous:
    case MethodKind::Rennala: return 1;
    case MethodKind::DelayAdaptive: return 0;
  }
  return 0;
}

RunResult run(const Objective& problem, const MethodConfig& method, const WorkerProfile& profile,
              const StopCondition& stop, std::uint64_t seed, const UpdateObserver& observer) {
  validate(problem, method, stop);
  const std::vector<double> base = base_times(profile);
  require(profile.noise_frac >= 0.0 && std::isfinite(profile.noise_frac), ErrorKind::InvalidInput,
          "noise fraction must be >= 0");
  const std::size_t n = base.size();

  std::vector<Rng> grad_rng;
  std::vector<Rng> time_rng;
  grad_rng.reserve(n);
  time_rng.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    grad_rng.push_back(derive_stream(seed, w, kGradientStream));
    time_rng.push_back(derive_stream(seed, w, kRuntimeStream));
  }

  RunResult result;
  ServerState state = ServerState::initial(problem.initial_point());
  std::vector<InFlight> jobs(n);
  std::map<std::int64_t, Snapshot> snapshots;
  std::priority_queue<Arrival, std::vector<Arrival>, LaterArrival> queue;
  std::vector<StampedGradient> batch;
  RunStats& stats = result.stats;
  stats.min_in_flight = n;
  stats.max_in_flight = n;

  const bool thresholded = method.kind != MethodKind::DelayAdaptive;

  auto dispatch = [&](std::size_t w, double now) {
    auto it = snapshots.find(state.k);
    if (it == snapshots.end()) it = snapshots.emplace(state.k, Snapshot{state.x, {}}).first;
    it->second.holders.push_back(w);
    jobs[w] = InFlight{state.k, now, false};
    queue.push({now + sample_runtime(base[w], profile.noise_frac, time_rng[w]), w});
  };

  auto release = [&](std::size_t w) {
    auto it = snapshots.find(jobs[w].computed_at);
    auto& holders = it->second.holders;
    holders.erase(std::find(holders.begin(), holders.end(), w));
    if (holders.empty()) snapshots.erase(it);
  };

  // With non-decreasing thresholds a gradient that is too stale now stays too
  // stale, so its iterate is no longer needed.
  auto prune = [&] {
    if (!thresholded) return;
    const std::int64_t cutoff = state.k - threshold_at(method, state.k);
    while (!snapshots.empty() && snapshots.begin()->first <= cutoff) {
      for (std::size_t w : snapshots.begin()->second.holders) jobs[w].doomed = true;
      snapshots.erase(snapshots.begin());
    }
  };

  auto notify = [&](std::int64_t before, double now, std::size_t w, std::int64_t delay, double eta,
                    const ParamVector& g) {
    if (observer) observer(UpdateEvent{before, now, static_cast<std::int64_t>(w), delay, eta, g, state.x});
  };

  for (std::size_t w = 0; w < n; ++w) dispatch(w, 0.0);

  while (true) {
    if (const auto* maxk = std::get_if<MaxUpdates>(&stop); maxk && state.k >= maxk->K) break;
    const Arrival next = queue.top();
    if (const auto* h = std::get_if<Horizon>(&stop); h && next.finish > h->seconds) break;
    queue.pop();

    const std::size_t w = next.worker;
    const double now = next.finish;
    const InFlight job = jobs[w];
    const std::int64_t k_before = state.k;
    const std::int64_t delay = k_before - job.computed_at;

    ParamVector g;
    if (job.doomed) {
      problem.skip_sample(grad_rng[w]);
    } else {
      g = problem.stochastic_gradient(snapshots.at(job.computed_at).x, grad_rng[w]);
      release(w);
    }

    bool accepted = false;
    switch (method.kind) {
      case MethodKind::RingmasterFixed:
      case MethodKind::RingmasterAgnostic: {
        const UpdateDecision d = accept_gradient(state, job.computed_at, threshold_at(method, k_before));
        if (d.accepted) {
          if (job.doomed) throw Error(ErrorKind::ProtocolViolation, "released iterate was still admissible");
          const double eta = step_size(method, k_before);
          state = apply_accepted(std::move(state), g, method.momentum, eta, method.norm);
          notify(k_before, now, w, delay, eta, g);
        } else {
          state = reject_gradient(std::move(state));
        }
        accepted = d.accepted;
        break;
      }
      case MethodKind::Synchronous: {
        accepted = job.computed_at == k_before;
        if (accepted) {
          state = apply_accepted(std::move(state), g, method.momentum, method.eta, method.norm);
          notify(k_before, now, w, delay, method.eta, g);
        } else {
          state = reject_gradient(std::move(state));
        }
        break;
      }
      case MethodKind::Rennala: {
        accepted = job.computed_at == k_before;
        if (accepted) {
          batch.push_back(StampedGradient{std::move(g), job.computed_at});
          if (static_cast<std::int64_t>(batch.size()) == method.batch) {
            state = baseline_rennala_step(std::move(state), batch, method.batch, method.momentum, method.eta,
                                          method.norm);
            if (observer) {
              ParamVector mean(state.x.layout());
              for (const auto& sg : batch) {
                for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += sg.g[i];
              }
              for (double& v : mean.data()) v /= static_cast<double>(method.batch);
              notify(k_before, now, w, delay, method.eta, mean);
            }
            batch.clear();
          }
        } else {
          state = reject_gradient(std::move(state));
        }
        break;
      }
      case MethodKind::DelayAdaptive: {
        accepted = true;
        state = baseline_delay_adaptive_step(std::move(state), g, delay, method.momentum, method.eta, method.norm);
        notify(k_before, now, w, delay, method.eta / (1.0 + static_cast<double>(delay)), g);
        break;
      }
    }

    const Measurement meas = measure(problem, state.x, method.norm);
    result.rows.push_back(TraceRow{now, stats.arrivals, static_cast<std::int64_t>(w), delay, accepted, state.k,
                                   meas.loss, meas.grad_dual_norm, state.total_rejected});
    ++stats.arrivals;
    stats.end_time = now;

    dispatch(w, now);
    if (state.k != k_before) prune();

    stats.min_in_flight = std::min(stats.min_in_flight, queue.size());
    stats.max_in_flight = std::max(stats.max_in_flight, queue.size());
    stats.max_live_snapshots = std::max(stats.max_live_snapshots, snapshots.size());
    if (!snapshots.empty() &&
        static_cast<std::int64_t>(snapshots.size()) > state.k - snapshots.begin()->first + 1) {
      stats.snapshot_span_ok = false;
    }
  }

  stats.updates = state.k;
  stats.rejected = state.total_rejected;
  result.final_state = std::move(state);
  return result;
}

}  // namespace ringmaster
