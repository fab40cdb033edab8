// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ringmaster/schedules.hpp"
#include "test_util.hpp"

using namespace ringmaster;
using testutil::throws_kind;

TEST_CASE("noise-free problems get alpha = 1 and R = 1") {
  const FixedSchedule s = fixed_schedule({2.0, 3.0, 0.0, 0.0, 1.0}, 1000);
  CHECK(s.alpha == 1.0);
  CHECK(s.R == 1);
  CHECK(s.eta == doctest::Approx(std::sqrt(2.0 / 3000.0)));
}

TEST_CASE("fixed schedule, L1 = 0") {
  const FixedSchedule s = fixed_schedule({1.0, 1.0, 0.0, 1.0, 1.0}, 100);
  CHECK(s.alpha == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.R == 10);
  CHECK(s.eta == doctest::Approx(std::pow(100.0, -0.75)).epsilon(1e-15));
  CHECK(s.eta == doctest::Approx(0.0316227766).epsilon(1e-9));
}

TEST_CASE("fixed schedule, L1 > 0 takes the smallest of four terms") {
  const FixedSchedule s = fixed_schedule({1.0, 1.0, 1.0, 1.0, 1.0}, 10000);
  CHECK(s.alpha == doctest::Approx(0.01));
  CHECK(s.R == 100);
  const double terms[] = {std::sqrt(1.0 / 10000.0), std::pow(10000.0, -0.75), 1.0 / 8.0, 1.0 / (8.0 * 100.0)};
  CHECK(terms[0] == doctest::Approx(0.01));
  CHECK(terms[3] == doctest::Approx(0.00125));
  CHECK(s.eta == doctest::Approx(0.001).epsilon(1e-14));
}

TEST_CASE("fixed schedule errors") {
  CHECK(throws_kind([] { (void)fixed_schedule({1, 1, 0, 1, 1}, 0); }, ErrorKind::InvalidInput));
  CHECK(throws_kind([] { (void)fixed_schedule({0, 1, 0, 1, 1}, 10); }, ErrorKind::DegenerateProblem));
  CHECK(throws_kind([] { (void)fixed_schedule({1, 0, 0, 1, 1}, 10); }, ErrorKind::DegenerateProblem));
  CHECK(throws_kind([] { (void)fixed_schedule({0, 1, 0, 0, 1}, 10); }, ErrorKind::DegenerateProblem));
  CHECK(throws_kind([] { (void)fixed_schedule({-1, 1, 0, 0, 1}, 10); }, ErrorKind::InvalidInput));
  CHECK(throws_kind([] { (void)fixed_schedule({1, 1, 0, 0, 0}, 10); }, ErrorKind::InvalidInput));
}

TEST_CASE("R is the ceiling of 1/alpha") {
  // alpha = 1/3 exactly in real arithmetic
  CHECK(fixed_schedule({1.0, 1.0, 0.0, 3.0, 1.0}, 1).R == 3);
  // alpha = 1/2.5
  CHECK(fixed_schedule({1.0, 1.0, 0.0, 2.5, 1.0}, 1).R == 3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> logu(-4.0, 4.0);
  for (int t = 0; t < 1000; ++t) {
    const ProblemConstants c{std::exp(logu(rng)), std::exp(logu(rng)), 0.0, std::exp(logu(rng)), 1.0};
    const FixedSchedule s = fixed_schedule(c, 1 + t);
    const double inv = 1.0 / s.alpha;
    CHECK(static_cast<double>(s.R) >= inv * (1.0 - 1e-12));
    CHECK(static_cast<double>(s.R) < inv + 1.0);
  }
}

TEST_CASE("fixed schedule properties over random constants") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> logu(-3.0, 3.0);
  std::uniform_int_distribution<std::int64_t> kdist(1, 1000000);
  for (int t = 0; t < 2000; ++t) {
    const ProblemConstants c{std::exp(logu(rng)), std::exp(logu(rng)), t % 3 == 0 ? 0.0 : std::exp(logu(rng)),
                             t % 5 == 0 ? 0.0 : std::exp(logu(rng)), std::exp(logu(rng) / 3.0)};
    const std::int64_t K = kdist(rng);
    const FixedSchedule s = fixed_schedule(c, K);
    CHECK(s.alpha > 0.0);
    CHECK(s.alpha <= 1.0);
    CHECK(s.eta > 0.0);
    CHECK(s.R >= 1);
    if (c.L1 > 0.0) CHECK(s.eta <= s.alpha / (8.0 * c.L1));
    const FixedSchedule longer = fixed_schedule(c, K + 1 + K / 2);
    CHECK(longer.alpha <= s.alpha);
    CHECK(longer.eta <= s.eta);
  }
}

TEST_CASE("agnostic alpha and eta examples") {
  CHECK(agnostic_alpha(0) == 1.0);
  CHECK(agnostic_alpha(4) == 0.5);
  CHECK(agnostic_alpha(9) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(agnostic_eta(0, {1.0, L1Zero{}}) == 1.0);
  CHECK(agnostic_eta(15, {1.0, L1Zero{}}) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(agnostic_eta(0, {1.0, L1Known{2.0}}) == doctest::Approx(1.0 / 34.0).epsilon(1e-15));
  CHECK(agnostic_eta(15, {1.0, L1UnknownPositive{}}) == doctest::Approx(1.0 / 136.0).epsilon(1e-15));
  CHECK(throws_kind([] { (void)agnostic_eta(0, {1.0, L1Known{0.0}}); }, ErrorKind::InvalidInput));
}

TEST_CASE("agnostic threshold examples and enumeration") {
  CHECK(agnostic_threshold(0) == 1);
  CHECK(agnostic_threshold(9) == 3);
  CHECK(agnostic_threshold(15) == 3);

  // walk k upward, bumping r each time k reaches the next perfect square
  std::int64_t r = 0;
  std::int64_t prev_R = 1;
  double prev_eta = std::numeric_limits<double>::infinity();
  double prev_alpha = 1.0;
  for (std::int64_t k = 0; k <= 1000000; ++k) {
    if ((r + 1) * (r + 1) == k) ++r;
    const std::int64_t R = agnostic_threshold(k);
    if (R != std::max<std::int64_t>(1, r)) {
      FAIL("threshold mismatch at k = " << k);
    }
    if (R < prev_R) FAIL("threshold decreased at k = " << k);
    prev_R = R;
    if (k % 97 == 0) {
      const double eta = agnostic_eta(k, {1.0, L1Zero{}});
      CHECK(eta < prev_eta);
      prev_eta = eta;
      const double a = agnostic_alpha(k);
      if (k >= 1) CHECK(a <= prev_alpha);
      prev_alpha = a;
    }
  }
  CHECK(isqrt(std::numeric_limits<std::int64_t>::max()) == 3037000499);
}

TEST_CASE("psi envelope examples") {
  CHECK(psi_envelope({1, 1, 0, 1, 1}, 1.0, L1Zero{}).value == 3.0);
  const EnvelopeValue e = psi_envelope({1, 1, 1, 0, 1}, 1.0, L1UnknownPositive{});
  CHECK(e.value == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-15));
  CHECK(e.value == doctest::Approx(5.43656).epsilon(1e-6));
  CHECK_FALSE(e.overflow);
  CHECK(psi_envelope({1, 4, 0, 1, 1}, 1.0, L1Known{2.0}).value == 5.0);

  const EnvelopeValue big = psi_envelope({1, 1, 100, 0, 1}, 1000.0, L1UnknownPositive{});
  CHECK(big.overflow);
  CHECK(std::isinf(big.value));
}

TEST_CASE("psi envelope matches an independent long double evaluation") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int t = 0; t < 100; ++t) {
    const ProblemConstants c{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const double eta = u(rng) / 2.0;
    const long double g = std::exp(static_cast<long double>(c.L1) * c.L1 * eta * eta);
    const long double expect = g * c.delta0 / eta + static_cast<long double>(c.rho) * c.sigma + g * c.L0 * eta;
    CHECK(psi_envelope(c, eta, L1UnknownPositive{}).value ==
          doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    const long double zero = static_cast<long double>(c.delta0) / eta + static_cast<long double>(c.rho) * c.sigma +
                             static_cast<long double>(c.L0) * eta;
    CHECK(psi_envelope(c, eta, L1Zero{}).value == doctest::Approx(static_cast<double>(zero)).epsilon(1e-12));
  }
}

TEST_CASE("iteration complexity reporters") {
  CHECK(iteration_complexity_fixed({1, 1, 0, 0, 1}, 0.1) == doctest::Approx(100.0));
  CHECK(iteration_complexity_fixed({1, 1, 1, 1, 1}, 1.0) == 5.0);
  CHECK(iteration_complexity_fixed({1, 1, 0, 1, 1}, 1.0) == 3.0);
  CHECK(iteration_complexity_agnostic(2.0, 1.0) == 16.0);
  CHECK(iteration_complexity_agnostic(1.0, std::exp(-2.0)) == doctest::Approx(std::pow(std::exp(2.0), 4) * 16.0));
}
