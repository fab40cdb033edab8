// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <variant>
#include <vector>

#include "ringmaster/lmo.hpp"
#include "ringmaster/optimizer.hpp"
#include "ringmaster/problems.hpp"
#include "ringmaster/schedules.hpp"

namespace ringmaster {

/// Measured mean NanoChat gradient step times (ms), H100 through GTX 1080 Ti.
inline constexpr std::array<double, 7> kGpuStepTimesMs{14.18, 22.74, 26.53, 38.42, 64.15, 128.60, 215.20};

enum class ProfileKind { Similar, Sublinear, Linear, GpuTable, Explicit };

struct WorkerProfile {
  ProfileKind kind = ProfileKind::Similar;
  std::size_t n = 1;
  double base_scale = 1.0;   ///< seconds; ignored by GpuTable and Explicit
  double noise_frac = 0.05;  ///< half-normal runtime noise, as a fraction of the base time
  std::vector<double> explicit_times;  ///< seconds, used when kind == Explicit
};

/// Deterministic base runtimes in seconds for workers i = 0..n-1.
/// Similar: s, Sublinear: s(1 + sqrt i), Linear: s(1 + i), GpuTable: cycles the measured means.
[[nodiscard]] std::vector<double> make_profile(ProfileKind kind, std::size_t n, double base_scale);
[[nodiscard]] std::vector<double> base_times(const WorkerProfile& profile);

/// base + |Z| * noise_frac * base, Z ~ N(0, 1).
[[nodiscard]] double sample_runtime(double base, double noise_frac, Rng& rng);

/// Independent stream for (worker, purpose) under a master seed.
[[nodiscard]] Rng derive_stream(std::uint64_t seed, std::uint64_t worker, std::uint64_t purpose);

enum class MethodKind { RingmasterFixed, RingmasterAgnostic, Synchronous, Rennala, DelayAdaptive };

[[nodiscard]] std::string_view to_string(MethodKind kind) noexcept;

struct MethodConfig {
  MethodKind kind = MethodKind::RingmasterFixed;
  MomentumRule momentum = MuonEma{};
  NormSpec norm;
  double eta = 0.01;            ///< constant step, agnostic scale, or delay-adaptive nominal step
  std::int64_t threshold = 1;   ///< R for RingmasterFixed
  std::int64_t batch = 1;       ///< B for Rennala
  AgnosticVariant agnostic_variant = L1Zero{};
};

struct Horizon {
  double seconds = 0.0;
};
struct MaxUpdates {
  std::int64_t K = 0;
};
using StopCondition = std::variant<Horizon, MaxUpdates>;

/// One row per gradient arrival, measured at the server iterate after processing it.
struct TraceRow {
  double sim_time_s = 0.0;
  std::int64_t event_index = 0;
  std::int64_t worker = 0;
  std::int64_t delay = 0;
  bool accepted = false;
  std::int64_t iteration = 0;
  double loss = 0.0;
  double grad_dual_norm = 0.0;
  std::int64_t rejected_total = 0;

  bool operator==(const TraceRow&) const = default;
};

struct RunStats {
  std::int64_t arrivals = 0;
  std::int64_t updates = 0;
  std::int64_t rejected = 0;
  double end_time = 0.0;
  std::size_t min_in_flight = 0;
  std::size_t max_in_flight = 0;
  std::size_t max_live_snapshots = 0;
  /// live snapshots <= (k - oldest live snapshot index) + 1 held after every event
  bool snapshot_span_ok = true;
};

struct RunResult {
  std::vector<TraceRow> rows;
  ServerState final_state;
  RunStats stats;
};

/// Reported once per model update.
struct UpdateEvent {
  std::int64_t iteration_before = 0;
  double time = 0.0;
  std::int64_t worker = 0;
  std::int64_t delay = 0;
  double eta = 0.0;
  const ParamVector& gradient;  ///< the gradient (or batch mean) that drove the update
  const ParamVector& x_after;
};
using UpdateObserver = std::function<void(const UpdateEvent&)>;

struct Measurement {
  double loss = 0.0;
  double grad_dual_norm = 0.0;
};

/// f(x) - f* when f* is known (else f(x)) and the dual norm of the true gradient.
[[nodiscard]] Measurement measure(const Objective& problem, const ParamVector& x, const NormSpec& spec);

/// Delay threshold the method applies at server iteration k (0 = no threshold).
[[nodiscard]] std::int64_t threshold_at(const MethodConfig& method, std::int64_t k);

/// Discrete-event run of the server/worker protocol. Single-threaded and a pure
/// function of its arguments.
[[nodiscard]] RunResult run(const Objective& problem, const MethodConfig& method, const WorkerProfile& profile,
                            const StopCondition& stop, std::uint64_t seed, const UpdateObserver& observer = {});

}  // namespace ringmaster
