// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/optimizer.hpp"

#include <cmath>

#include "ringmaster/error.hpp"
#include "ringmaster/schedules.hpp"

namespace ringmaster {
namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

ServerState ServerState::initial(ParamVector x0) {
  ServerState s;
  s.m = ParamVector(x0.layout());
  s.x = std::move(x0);
  return s;
}

double momentum_weight(const TheoryAveraging& rule, std::int64_t k) {
  if (k == 0) return rule.alpha_init;
  if (const auto* fixed = std::get_if<FixedAlpha>(&rule.alpha)) return fixed->alpha;
  return agnostic_alpha(k);
}

UpdateDecision accept_gradient(const ServerState& state, std::int64_t computed_at, std::int64_t threshold) {
  if (computed_at > state.k || computed_at < 0) {
    throw Error(ErrorKind::ProtocolViolation, "gradient stamped with a future or negative iteration");
  }
  require(threshold >= 1, ErrorKind::InvalidInput, "delay threshold must be >= 1");
  UpdateDecision d;
  d.delay = state.k - computed_at;
  d.accepted = d.delay < threshold;
  d.iteration_after = d.accepted ? state.k + 1 : state.k;
  return d;
}

ServerState apply_accepted(ServerState state, const ParamVector& g, const MomentumRule& rule, double eta,
                           const NormSpec& spec) {
  require(g.size() == state.x.size(), ErrorKind::InvalidInput, "gradient dimension mismatch");
  require(g.all_finite(), ErrorKind::InvalidInput, "non-finite gradient");
  require(std::isfinite(eta) && eta >= 0.0, ErrorKind::InvalidInput, "step size must be finite and >= 0");

  auto m = state.m.data();
  const auto gd = g.data();
  ParamVector direction;

  if (const auto* avg = std::get_if<TheoryAveraging>(&rule)) {
    const double a = momentum_weight(*avg, state.k);
    if (state.k == 0) {
      // alpha_0 = 1: m_1 = alpha_init * g_0 regardless of m_0.
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = a * gd[i];
    } else {
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - a) * m[i] + a * gd[i];
    }
    direction = blockwise_lmo(state.m, spec);
  } else {
    const auto& ema = std::get<MuonEma>(rule);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = ema.beta * m[i] + gd[i];
    if (ema.nesterov) {
      ParamVector lookahead = g;
      axpy(ema.beta, state.m.data(), lookahead.data());
      direction = blockwise_lmo(lookahead, spec);
    } else {
      direction = blockwise_lmo(state.m, spec);
    }
  }

  axpy(eta, direction.data(), state.x.data());
  ++state.k;
  ++state.total_received;
  return state;
}

ServerState reject_gradient(ServerState state) {
  ++state.total_received;
  ++state.total_rejected;
  return state;
}

ServerState baseline_rennala_step(ServerState state, std::span<const StampedGradient> grads,
                                  std::int64_t batch_size, const MomentumRule& rule, double eta,
                                  const NormSpec& spec) {
  require(batch_size >= 1, ErrorKind::InvalidInput, "batch size must be >= 1");
  require(static_cast<std::int64_t>(grads.size()) == batch_size, ErrorKind::InvalidInput,
          "batch does not contain exactly B gradients");
  ParamVector mean(state.x.layout());
  for (const auto& sg : grads) {
    if (sg.computed_at != state.k) {
      throw Error(ErrorKind::ProtocolViolation, "stale gradient in a batch");
    }
    require(sg.g.size() == mean.size(), ErrorKind::InvalidInput, "gradient dimension mismatch");
    axpy(1.0, sg.g.data(), mean.data());
  }
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (double& v : mean.data()) v *= inv;
  return apply_accepted(std::move(state), mean, rule, eta, spec);
}

ServerState baseline_delay_adaptive_step(ServerState state, const ParamVector& g, std::int64_t delay,
                                         const MomentumRule& rule, double eta_nominal, const NormSpec& spec) {
  require(delay >= 0, ErrorKind::InvalidInput, "delay must be >= 0");
  const double eta = eta_nominal / (1.0 + static_cast<double>(delay));
  return apply_accepted(std::move(state), g, rule, eta, spec);
}

}  // namespace ringmaster
