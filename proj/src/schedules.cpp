// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ringmaster/error.hpp"

namespace ringmaster {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// a / b with b == 0 mapped to +inf, so empty min-terms drop out.
double ratio_or_inf(double a, double b) { return b == 0.0 ? kInf : a / b; }

}  // namespace

void ProblemConstants::validate() const {
  for (double v : {delta0, L0, L1, sigma, rho}) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidInput, "problem constants must be finite and >= 0");
  }
  require(rho > 0.0, ErrorKind::InvalidInput, "rho must be positive");
}

FixedSchedule fixed_schedule(const ProblemConstants& c, std::int64_t K) {
  require(K >= 1, ErrorKind::InvalidInput, "K must be at least 1");
  c.validate();
  const double k = static_cast<double>(K);
  const double rho_sigma = c.rho * c.sigma;
  const double sqrt_dl = std::sqrt(c.delta0 * c.L0);

  FixedSchedule s;
  s.K = K;
  s.alpha = c.sigma == 0.0 ? 1.0 : std::min(1.0, sqrt_dl / (rho_sigma * std::sqrt(k)));
  if (!(s.alpha > 0.0)) {
    throw Error(ErrorKind::DegenerateProblem, "alpha vanishes (Delta0 * L0 == 0 with sigma > 0)");
  }
  // Ceil with a relative guard so that 1/alpha = 10 + 1ulp still yields 10.
  const double inv = 1.0 / s.alpha;
  s.R = static_cast<std::int64_t>(std::ceil(inv * (1.0 - 4.0 * std::numeric_limits<double>::epsilon())));
  s.R = std::max<std::int64_t>(s.R, 1);

  double eta = std::min(std::sqrt(ratio_or_inf(c.delta0, c.L0 * k)),
                        ratio_or_inf(std::pow(c.delta0, 0.75),
                                     std::pow(c.L0, 0.25) * std::sqrt(rho_sigma) * std::pow(k, 0.75)));
  if (c.L1 > 0.0) {
    // min{1/(8 L1), sqrt(D L0)/(8 L1 rho sigma sqrt K)} is alpha / (8 L1); use it as is so
    // eta <= alpha / (8 L1) holds in floating point too.
    eta = std::min(eta, s.alpha / (8.0 * c.L1));
  }
  if (!(std::isfinite(eta) && eta > 0.0)) {
    throw Error(ErrorKind::DegenerateProblem, "step size bracket is empty or zero");
  }
  s.eta = eta;
  return s;
}

std::int64_t isqrt(std::int64_t k) {
  if (k <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(k)));
  // Compare through division so (r + 1)^2 never overflows.
  while (r > k / r) --r;
  while (r + 1 <= k / (r + 1)) ++r;
  return r;
}

double agnostic_alpha(std::int64_t k) {
  require(k >= 0, ErrorKind::InvalidInput, "iteration index must be >= 0");
  return k == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k));
}

std::int64_t agnostic_threshold(std::int64_t k) {
  require(k >= 0, ErrorKind::InvalidInput, "iteration index must be >= 0");
  return std::max<std::int64_t>(1, isqrt(k));
}

double agnostic_eta(std::int64_t k, const AgnosticSchedule& s) {
  require(k >= 0, ErrorKind::InvalidInput, "iteration index must be >= 0");
  const double decay = std::pow(static_cast<double>(k) + 1.0, 0.75);
  if (std::holds_alternative<L1Zero>(s.variant)) return s.eta_scale / decay;
  if (std::holds_alternative<L1UnknownPositive>(s.variant)) return s.eta_scale / (17.0 * decay);
  const double l1 = std::get<L1Known>(s.variant).L1;
  require(std::isfinite(l1) && l1 > 0.0, ErrorKind::InvalidInput, "known L1 must be positive");
  return 1.0 / (17.0 * l1 * decay);
}

EnvelopeValue psi_envelope(const ProblemConstants& c, double eta, const AgnosticVariant& variant) {
  c.validate();
  const double rho_sigma = c.rho * c.sigma;
  if (const auto* known = std::get_if<L1Known>(&variant)) {
    require(known->L1 > 0.0, ErrorKind::InvalidInput, "known L1 must be positive");
    return {known->L1 * c.delta0 + rho_sigma + c.L0 / known->L1, false};
  }
  require(std::isfinite(eta) && eta > 0.0, ErrorKind::InvalidInput, "eta must be positive");
  if (std::holds_alternative<L1Zero>(variant)) {
    return {c.delta0 / eta + rho_sigma + c.L0 * eta, false};
  }
  const double exponent = c.L1 * c.L1 * eta * eta;
  if (exponent > std::log(std::numeric_limits<double>::max())) {
    return {kInf, true};
  }
  const double growth = std::exp(exponent);
  const double value = growth * c.delta0 / eta + rho_sigma + growth * c.L0 * eta;
  if (!std::isfinite(value)) return {kInf, true};
  return {value, false};
}

double iteration_complexity_fixed(const ProblemConstants& c, double eps) {
  require(std::isfinite(eps) && eps > 0.0, ErrorKind::InvalidInput, "eps must be positive");
  c.validate();
  const double rs2 = (c.rho * c.sigma) * (c.rho * c.sigma);
  const double eps2 = eps * eps;
  double total = c.L0 * c.delta0 / eps2 + c.L0 * c.delta0 * rs2 / (eps2 * eps2) + rs2 / eps2;
  if (c.L1 > 0.0) {
    total += c.L1 * c.delta0 / eps;
    total += ratio_or_inf(c.L1 * c.L1 * c.delta0 * rs2, c.L0 * eps2);
  }
  return total;
}

double iteration_complexity_agnostic(double psi, double eps) {
  require(std::isfinite(eps) && eps > 0.0, ErrorKind::InvalidInput, "eps must be positive");
  const double ratio = psi / eps;
  const double log_term = std::max(1.0, std::log(1.0 / eps));
  return std::pow(ratio, 4) * std::pow(log_term, 4);
}

}  // namespace ringmaster
