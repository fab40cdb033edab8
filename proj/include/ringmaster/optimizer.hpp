// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <variant>

#include "ringmaster/lmo.hpp"

namespace ringmaster {

/// Server state. Invariant: k == total_received - total_rejected.
struct ServerState {
  std::int64_t k = 0;
  ParamVector x;
  ParamVector m;
  std::int64_t total_received = 0;
  std::int64_t total_rejected = 0;

  static ServerState initial(ParamVector x0);

  bool operator==(const ServerState&) const = default;
};

struct FixedAlpha {
  double alpha = 1.0;
};
struct AgnosticAlpha {};

/// m_{k+1} = (1 - alpha_k) m_k + alpha_k g_k, with alpha_0 = 1 so m_0 is never read.
struct TheoryAveraging {
  std::variant<FixedAlpha, AgnosticAlpha> alpha = AgnosticAlpha{};
  double alpha_init = 1.0;
};

/// m <- beta m + g; direction lmo(g + beta m) with Nesterov lookahead, else lmo(m).
struct MuonEma {
  double beta = 0.95;
  bool nesterov = true;
};

using MomentumRule = std::variant<TheoryAveraging, MuonEma>;

/// Averaging weight used when the server sits at iteration k.
[[nodiscard]] double momentum_weight(const TheoryAveraging& rule, std::int64_t k);

struct UpdateDecision {
  bool accepted = false;
  std::int64_t delay = 0;
  std::int64_t iteration_after = 0;
};

/// Pure query: accepted iff k - computed_at < R_k. Throws ProtocolViolation if computed_at > k.
[[nodiscard]] UpdateDecision accept_gradient(const ServerState& state, std::int64_t computed_at,
                                             std::int64_t threshold);

/// Momentum update followed by x += eta * lmo(direction); k advances by one.
[[nodiscard]] ServerState apply_accepted(ServerState state, const ParamVector& g, const MomentumRule& rule,
                                         double eta, const NormSpec& spec);

[[nodiscard]] ServerState reject_gradient(ServerState state);

struct StampedGradient {
  ParamVector g;
  std::int64_t computed_at = 0;
};

/// Averages a full batch of gradients taken at the current iterate and applies one update.
[[nodiscard]] ServerState baseline_rennala_step(ServerState state, std::span<const StampedGradient> grads,
                                                std::int64_t batch_size, const MomentumRule& rule, double eta,
                                                const NormSpec& spec);

/// Accepts any delay and damps the step to eta / (1 + delay).
[[nodiscard]] ServerState baseline_delay_adaptive_step(ServerState state, const ParamVector& g, std::int64_t delay,
                                                       const MomentumRule& rule, double eta_nominal,
                                                       const NormSpec& spec);

}  // namespace ringmaster
