// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ringmaster/lmo.hpp"
#include "ringmaster/schedules.hpp"

namespace ringmaster {

using Rng = std::mt19937_64;

/// Objective oracle consumed by the simulator. Implementations are immutable after
/// construction; all randomness comes from the caller's stream.
class Objective {
 public:
  virtual ~Objective() = default;

  [[nodiscard]] virtual const BlockLayout& layout() const = 0;
  [[nodiscard]] virtual ParamVector initial_point() const = 0;
  [[nodiscard]] virtual double value(const ParamVector& x) const = 0;
  [[nodiscard]] virtual ParamVector gradient(const ParamVector& x) const = 0;
  [[nodiscard]] virtual ParamVector stochastic_gradient(const ParamVector& x, Rng& rng) const = 0;
  /// Advances `rng` exactly as one stochastic_gradient call would.
  virtual void skip_sample(Rng& rng) const = 0;
  [[nodiscard]] virtual std::optional<double> optimal_value() const = 0;
};

/// Thomas algorithm for a tridiagonal system; sub[0] and sup[n-1] are ignored.
[[nodiscard]] std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                                    std::span<const double> sup, std::span<const double> rhs);

/// f(x) = 1/2 x^T A x - b^T x with A = 1/4 tridiag(-1, 2, -1), b = -1/4 e_1, x0 = sqrt(d) e_1.
struct QuadraticSpec {
  std::size_t d = 64;
  double noise_std = 0.01;
};

struct ValueGrad {
  double value = 0.0;
  ParamVector grad;
};

[[nodiscard]] ValueGrad quad_value_grad(const QuadraticSpec& spec, const ParamVector& x);
/// grad f(x) + xi * 1 with one scalar xi ~ N(0, noise_std^2) per call.
[[nodiscard]] ParamVector quad_stochastic_grad(const QuadraticSpec& spec, const ParamVector& x, Rng& rng);
[[nodiscard]] ParamVector solve_exact_minimizer(const QuadraticSpec& spec);
/// j-th eigenvalue of A, j = 1..d: (1 - cos(j pi / (d + 1))) / 2.
[[nodiscard]] double quad_eigenvalue(const QuadraticSpec& spec, std::size_t j);
/// y = A x via the stencil.
void quad_apply(std::span<const double> x, std::span<double> y);

class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(QuadraticSpec spec);

  [[nodiscard]] const QuadraticSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const ParamVector& minimizer() const noexcept { return minimizer_; }

  [[nodiscard]] const BlockLayout& layout() const override { return layout_; }
  [[nodiscard]] ParamVector initial_point() const override;
  [[nodiscard]] double value(const ParamVector& x) const override;
  [[nodiscard]] ParamVector gradient(const ParamVector& x) const override;
  [[nodiscard]] ParamVector stochastic_gradient(const ParamVector& x, Rng& rng) const override;
  void skip_sample(Rng& rng) const override;
  [[nodiscard]] std::optional<double> optimal_value() const override { return optimum_; }

  /// Delta0 exact, L0 = lambda_max(A), L1 = 0, sigma^2 = d * noise_std^2; rho from the norm.
  /// L0 is the Euclidean smoothness constant.
  [[nodiscard]] ProblemConstants constants(const NormSpec& spec) const;

 private:
  QuadraticSpec spec_;
  BlockLayout layout_;
  ParamVector minimizer_;
  double optimum_ = 0.0;
};

/// f(W) = 1/2 ||W - W*||_F^2 with a seeded Gaussian target; W0 = 0.
struct MatrixToySpec {
  std::size_t rows = 8;
  std::size_t cols = 8;
  double noise_std = 0.01;
  std::uint64_t target_seed = 7;
};

/// (W - W*) + xi * E, E the all-ones matrix.
[[nodiscard]] Eigen::MatrixXd matrix_toy_grad(const MatrixToySpec& spec, const Eigen::MatrixXd& w, Rng& rng);
[[nodiscard]] Eigen::MatrixXd matrix_toy_target(const MatrixToySpec& spec);

class MatrixToyObjective final : public Objective {
 public:
  explicit MatrixToyObjective(MatrixToySpec spec);

  [[nodiscard]] const MatrixToySpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const Eigen::MatrixXd& target() const noexcept { return target_; }

  [[nodiscard]] const BlockLayout& layout() const override { return layout_; }
  [[nodiscard]] ParamVector initial_point() const override;
  [[nodiscard]] double value(const ParamVector& x) const override;
  [[nodiscard]] ParamVector gradient(const ParamVector& x) const override;
  [[nodiscard]] ParamVector stochastic_gradient(const ParamVector& x, Rng& rng) const override;
  void skip_sample(Rng& rng) const override;
  [[nodiscard]] std::optional<double> optimal_value() const override { return 0.0; }

 private:
  MatrixToySpec spec_;
  BlockLayout layout_;
  Eigen::MatrixXd target_;
};

}  // namespace ringmaster
