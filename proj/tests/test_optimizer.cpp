// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ringmaster/optimizer.hpp"
#include "ringmaster/schedules.hpp"
#include "test_util.hpp"

using namespace ringmaster;
using testutil::Rng;
using testutil::throws_kind;

namespace {

const BlockLayout kTwo = BlockLayout::vector(2);
const NormSpec kEuc = NormSpec::uniform(NormKind::Euclidean, kTwo);

ServerState at(std::int64_t k, std::vector<double> x, std::vector<double> m) {
  ServerState s;
  s.k = k;
  s.total_received = k;
  s.x = ParamVector(kTwo, std::move(x));
  s.m = ParamVector(kTwo, std::move(m));
  return s;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("acceptance decision examples") {
  const ServerState s5 = at(5, {0, 0}, {0, 0});
  UpdateDecision d = accept_gradient(s5, 5, 1);
  CHECK(d.accepted);
  CHECK(d.delay == 0);
  CHECK(d.iteration_after == 6);
  d = accept_gradient(s5, 3, 2);
  CHECK_FALSE(d.accepted);
  CHECK(d.delay == 2);
  CHECK(d.iteration_after == 5);
  d = accept_gradient(at(10, {0, 0}, {0, 0}), 8, 4);
  CHECK(d.accepted);
  CHECK(d.delay == 2);
  CHECK(throws_kind([&] { (void)accept_gradient(s5, 6, 1); }, ErrorKind::ProtocolViolation));
  CHECK(throws_kind([&] { (void)accept_gradient(s5, 5, 0); }, ErrorKind::InvalidInput));
}

TEST_CASE("averaging momentum examples") {
  const TheoryAveraging rule{AgnosticAlpha{}, 1.0};
  ServerState s = apply_accepted(ServerState::initial(ParamVector(kTwo)), ParamVector(kTwo, {3, 4}), rule, 1.0, kEuc);
  CHECK(s.k == 1);
  CHECK(s.m == ParamVector(kTwo, {3, 4}));
  CHECK(s.x[0] == doctest::Approx(-0.6));
  CHECK(s.x[1] == doctest::Approx(-0.8));

  // alpha_1 = 1 overwrites whatever momentum was there
  const ServerState s1 = apply_accepted(at(1, {0, 0}, {7, -3}), ParamVector(kTwo, {0, 2}), rule, 0.5, kEuc);
  CHECK(s1.m == ParamVector(kTwo, {0, 2}));
  CHECK(s1.x == ParamVector(kTwo, {0, -0.5}));
}

TEST_CASE("averaging momentum tracks a constant gradient") {
  const TheoryAveraging rule{AgnosticAlpha{}, 0.5};
  const ParamVector g(kTwo, {1.5, -2.0});
  ServerState s = ServerState::initial(ParamVector(kTwo));
  double prev = std::numeric_limits<double>::infinity();
  // m_k - g = (alpha_init - 1) * prod_{j=1}^{k-1} (1 - alpha_j) * g
  double prod = 0.5 - 1.0;
  for (int k = 0; k < 10; ++k) {
    s = apply_accepted(std::move(s), g, rule, 0.1, kEuc);
    if (k >= 1) prod *= 1.0 - agnostic_alpha(k);
    const double gap = std::hypot(s.m[0] - g[0], s.m[1] - g[1]);
    CHECK(gap == doctest::Approx(std::abs(prod) * std::hypot(g[0], g[1])).epsilon(1e-12));
    CHECK(gap <= prev);
    prev = gap;
  }
  CHECK(prev == 0.0);  // alpha_1 = 1 lands exactly on g
}

TEST_CASE("momentum stays on the segment between m_k and g_k") {
  Rng rng(10);
  const BlockLayout layout = BlockLayout::vector(5);
  const NormSpec spec = NormSpec::uniform(NormKind::Euclidean, layout);
  const TheoryAveraging rule{FixedAlpha{0.3}, 1.0};
  ServerState s = ServerState::initial(ParamVector(layout));
  for (int k = 0; k < 50; ++k) {
    const ParamVector g(layout, testutil::gaussian_vector(rng, 5));
    const ParamVector m_before = s.m;
    s = apply_accepted(std::move(s), g, rule, 0.01, spec);
    for (std::size_t i = 0; i < 5; ++i) {
      const double lo = k == 0 ? g[i] : std::min(m_before[i], g[i]);
      const double hi = k == 0 ? g[i] : std::max(m_before[i], g[i]);
      CHECK(s.m[i] >= lo - 1e-15);
      CHECK(s.m[i] <= hi + 1e-15);
    }
  }
}

TEST_CASE("EMA momentum with and without lookahead") {
  const MuonEma plain{0.5, false};
  const MuonEma nest{0.5, true};
  const ServerState s0 = at(3, {0, 0}, {2, 0});
  const ParamVector g(kTwo, {0, 1});
  const ServerState a = apply_accepted(s0, g, plain, 1.0, kEuc);
  CHECK(a.m == ParamVector(kTwo, {1, 1}));
  CHECK(a.x[0] == doctest::Approx(-1.0 / std::sqrt(2.0)));
  const ServerState b = apply_accepted(s0, g, nest, 1.0, kEuc);
  CHECK(b.m == ParamVector(kTwo, {1, 1}));
  // lookahead g + beta * m_new = (0.5, 1.5)
  CHECK(b.x[0] == doctest::Approx(-0.5 / std::hypot(0.5, 1.5)));
  CHECK(b.x[1] == doctest::Approx(-1.5 / std::hypot(0.5, 1.5)));
}

TEST_CASE("step length is bounded by eta in the primal norm") {
  Rng rng(11);
  const BlockLayout layout({VectorShape{3}, MatrixShape{3, 4}});
  const NormSpec spec{{NormKind::MaxAbs, NormKind::Spectral}, ExactSvd{}};
  for (const MomentumRule& rule : {MomentumRule{TheoryAveraging{}}, MomentumRule{MuonEma{}}}) {
    ServerState s = ServerState::initial(ParamVector(layout));
    for (int k = 0; k < 100; ++k) {
      const double eta = 0.1 / (1.0 + k);
      const ParamVector before = s.x;
      s = apply_accepted(std::move(s), ParamVector(layout, testutil::gaussian_vector(rng, 15)), rule, eta, spec);
      ParamVector step = s.x;
      for (std::size_t i = 0; i < step.size(); ++i) step[i] -= before[i];
      CHECK(primal_norm(step, spec) <= eta * (1.0 + 1e-9));
      CHECK(s.k == s.total_received - s.total_rejected);
    }
  }
}

TEST_CASE("euclidean step is normalized SGD with momentum") {
  Rng rng(12);
  const BlockLayout layout = BlockLayout::vector(6);
  const NormSpec spec = NormSpec::uniform(NormKind::Euclidean, layout);
  const TheoryAveraging rule{};
  ServerState s = ServerState::initial(ParamVector(layout, testutil::gaussian_vector(rng, 6)));
  std::vector<double> x(s.x.values());
  std::vector<double> m(6, 0.0);
  for (int k = 0; k < 100; ++k) {
    const ParamVector g(layout, testutil::gaussian_vector(rng, 6));
    const double eta = 0.05 / std::pow(k + 1.0, 0.75);
    s = apply_accepted(std::move(s), g, rule, eta, spec);
    const double a = k == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k));
    for (std::size_t i = 0; i < 6; ++i) m[i] = (1.0 - a) * m[i] + a * g[i];
    const double norm = l2(m);
    for (std::size_t i = 0; i < 6; ++i) {
      x[i] -= eta * m[i] / norm;
      CHECK(std::abs(s.x[i] - x[i]) <= 1e-12);
    }
  }
}

TEST_CASE("zero momentum gives a no-op step") {
  const ServerState s = apply_accepted(at(2, {1, 1}, {0, 0}), ParamVector(kTwo), MuonEma{0.9, true}, 1.0, kEuc);
  CHECK(s.x == ParamVector(kTwo, {1, 1}));
  CHECK(s.k == 3);
}

TEST_CASE("rejections leave the iterate untouched") {
  ServerState s = at(4, {1, 2}, {3, 4});
  const ServerState orig = s;
  s = reject_gradient(std::move(s));
  s = reject_gradient(std::move(s));
  CHECK(s.x == orig.x);
  CHECK(s.m == orig.m);
  CHECK(s.k == orig.k);
  CHECK(s.total_rejected == 2);
  CHECK(s.k == s.total_received - s.total_rejected);

  const ParamVector g(kTwo, {1, -1});
  const ServerState direct = apply_accepted(orig, g, MuonEma{}, 0.1, kEuc);
  const ServerState replay = apply_accepted(s, g, MuonEma{}, 0.1, kEuc);
  CHECK(replay.x == direct.x);
  CHECK(replay.m == direct.m);
  CHECK(replay.k == direct.k);
}

TEST_CASE("non-finite gradients are rejected") {
  std::vector<double> bad{1.0, std::numeric_limits<double>::infinity()};
  CHECK(throws_kind([&] { (void)ParamVector(kTwo, bad); }, ErrorKind::InvalidInput));
  CHECK(throws_kind([] { (void)apply_accepted(at(0, {0, 0}, {0, 0}), ParamVector(BlockLayout::vector(3)), MuonEma{}, 1.0, kEuc); },
                    ErrorKind::InvalidInput));
}

TEST_CASE("rennala batch step") {
  Rng rng(13);
  const MomentumRule rule = MuonEma{};
  const ServerState s = at(7, {0.5, -0.5}, {0.1, 0.2});
  const ParamVector g(kTwo, {1, 3});
  std::vector<StampedGradient> one{{g, 7}};
  CHECK(baseline_rennala_step(s, one, 1, rule, 0.1, kEuc).x == apply_accepted(s, g, rule, 0.1, kEuc).x);
  std::vector<StampedGradient> twin{{g, 7}, {g, 7}};
  CHECK(baseline_rennala_step(s, twin, 2, rule, 0.1, kEuc).x == apply_accepted(s, g, rule, 0.1, kEuc).x);

  std::vector<StampedGradient> four;
  double sum0 = 0.0;
  double sum1 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto v = testutil::gaussian_vector(rng, 2);
    sum0 += v[0];
    sum1 += v[1];
    four.push_back({ParamVector(kTwo, v), 7});
  }
  const ServerState r = baseline_rennala_step(s, four, 4, rule, 0.1, kEuc);
  const ServerState e = apply_accepted(s, ParamVector(kTwo, {sum0 / 4, sum1 / 4}), rule, 0.1, kEuc);
  CHECK(r.x[0] == doctest::Approx(e.x[0]).epsilon(1e-14));
  CHECK(r.x[1] == doctest::Approx(e.x[1]).epsilon(1e-14));
  CHECK(r.k == 8);

  four[2].computed_at = 6;
  CHECK(throws_kind([&] { (void)baseline_rennala_step(s, four, 4, rule, 0.1, kEuc); }, ErrorKind::ProtocolViolation));
  CHECK(throws_kind([&] { (void)baseline_rennala_step(s, twin, 3, rule, 0.1, kEuc); }, ErrorKind::InvalidInput));
}

TEST_CASE("delay-adaptive step shrinks with the delay") {
  const ServerState s = at(3, {0, 0}, {0, 0});
  const ParamVector g(kTwo, {3, 4});
  const MomentumRule rule = MuonEma{0.0, false};
  CHECK(baseline_delay_adaptive_step(s, g, 0, rule, 1.0, kEuc).x == apply_accepted(s, g, rule, 1.0, kEuc).x);
  const ServerState d3 = baseline_delay_adaptive_step(s, g, 3, rule, 1.0, kEuc);
  CHECK(d3.x[0] == doctest::Approx(-0.6 * 0.25));
  CHECK(d3.x[1] == doctest::Approx(-0.8 * 0.25));
  double prev = std::numeric_limits<double>::infinity();
  for (std::int64_t delay : {0, 1, 10, 100, 10000}) {
    const double len = l2(baseline_delay_adaptive_step(s, g, delay, rule, 1.0, kEuc).x.data());
    CHECK(len < prev);
    prev = len;
  }
}
