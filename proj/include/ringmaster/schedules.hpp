// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>

namespace ringmaster {

/// Problem constants entering the step-size and threshold formulas.
struct ProblemConstants {
  double delta0 = 0.0;  ///< f(x0) - f*
  double L0 = 0.0;
  double L1 = 0.0;
  double sigma = 0.0;
  double rho = 1.0;

  /// Throws InvalidInput on negative or non-finite fields, or rho <= 0.
  void validate() const;
};

struct FixedSchedule {
  double alpha = 1.0;
  std::int64_t R = 1;
  double eta = 0.0;
  std::int64_t K = 1;
};

/// Constant (alpha, R, eta) tuned to the horizon K.
/// Throws InvalidInput for K == 0 and DegenerateProblem when eta or R is not a positive finite number.
[[nodiscard]] FixedSchedule fixed_schedule(const ProblemConstants& c, std::int64_t K);

struct L1Zero {};
struct L1UnknownPositive {};
struct L1Known {
  double L1 = 0.0;
};
using AgnosticVariant = std::variant<L1Zero, L1UnknownPositive, L1Known>;

struct AgnosticSchedule {
  double eta_scale = 1.0;
  AgnosticVariant variant = L1Zero{};
};

[[nodiscard]] double agnostic_alpha(std::int64_t k);
[[nodiscard]] std::int64_t agnostic_threshold(std::int64_t k);
[[nodiscard]] double agnostic_eta(std::int64_t k, const AgnosticSchedule& s);

/// Largest r with r*r <= k, exact for all 64-bit inputs.
[[nodiscard]] std::int64_t isqrt(std::int64_t k);

struct EnvelopeValue {
  double value = 0.0;
  bool overflow = false;  ///< exp(L1^2 eta^2) overflowed; value is +inf
};

/// Psi envelope: e^{L1^2 eta^2} Delta0 / eta + rho sigma + e^{L1^2 eta^2} L0 eta.
/// L1Zero drops the exponential, L1Known evaluates L1 Delta0 + rho sigma + L0 / L1.
[[nodiscard]] EnvelopeValue psi_envelope(const ProblemConstants& c, double eta, const AgnosticVariant& variant);

// Order-of-magnitude reporters; every O(.) constant is 1.

[[nodiscard]] double iteration_complexity_fixed(const ProblemConstants& c, double eps);
[[nodiscard]] double iteration_complexity_agnostic(double psi, double eps);

}  // namespace ringmaster
