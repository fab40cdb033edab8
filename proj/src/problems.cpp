// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/problems.hpp"

#include <cmath>
#include <numbers>

#include "ringmaster/error.hpp"

namespace ringmaster {
namespace {

double draw_noise(double noise_std, Rng& rng) {
  // Always consume the stream so that skip_sample stays in lockstep.
  std::normal_distribution<double> normal(0.0, 1.0);
  return noise_std * normal(rng);
}

void require_dim(const QuadraticSpec& spec, const ParamVector& x) {
  require(spec.d >= 1, ErrorKind::InvalidInput, "quadratic dimension must be >= 1");
  require(x.size() == spec.d, ErrorKind::InvalidInput, "quadratic dimension mismatch");
}

using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

Eigen::MatrixXd as_matrix(const ParamVector& x, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(x.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ParamVector from_matrix(const BlockLayout& layout, const Eigen::MatrixXd& m) {
  ParamVector out(layout);
  Eigen::Map<RowMajorMatrix>(out.data().data(), m.rows(), m.cols()) = m;
  return out;
}

}  // namespace

std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> sup, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  require(n >= 1 && sub.size() == n && sup.size() == n && rhs.size() == n, ErrorKind::InvalidInput,
          "tridiagonal system size mismatch");
  std::vector<double> c_prime(n);
  std::vector<double> x(n);
  require(diag[0] != 0.0, ErrorKind::NumericalFailure, "zero pivot in tridiagonal solve");
  c_prime[0] = sup[0] / diag[0];
  x[0] = rhs[0] / diag[0];

  // Forward sweep
  for (std::size_t i = 1; i < n; ++i) {
    const double pivot = diag[i] - sub[i] * c_prime[i - 1];
    require(pivot != 0.0, ErrorKind::NumericalFailure, "zero pivot in tridiagonal solve");
    c_prime[i] = sup[i] / pivot;
    x[i] = (rhs[i] - sub[i] * x[i - 1]) / pivot;
  }

  // Back substitution
  for (std::size_t i = n - 1; i > 0; --i) {
    x[i - 1] -= c_prime[i - 1] * x[i];
  }
  return x;
}

void quad_apply(std::span<const double> x, std::span<double> y) {
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < d; ++i) {
    double v = 2.0 * x[i];
    if (i > 0) v -= x[i - 1];
    if (i + 1 < d) v -= x[i + 1];
    y[i] = 0.25 * v;
  }
}

ValueGrad quad_value_grad(const QuadraticSpec& spec, const ParamVector& x) {
  require_dim(spec, x);
  ValueGrad out{0.0, ParamVector(x.layout())};
  auto g = out.grad.data();
  quad_apply(x.data(), g);
  double quad = 0.0;
  for (std::size_t i = 0; i < spec.d; ++i) quad += x[i] * g[i];
  // b = -e_1 / 4, so -b^T x = x_1 / 4 and grad = A x - b = A x + e_1 / 4.
  out.value = 0.5 * quad + 0.25 * x[0];
  g[0] += 0.25;
  return out;
}

ParamVector quad_stochastic_grad(const QuadraticSpec& spec, const ParamVector& x, Rng& rng) {
  ParamVector g = quad_value_grad(spec, x).grad;
  const double xi = draw_noise(spec.noise_std, rng);
  for (double& v : g.data()) v += xi;
  return g;
}

ParamVector solve_exact_minimizer(const QuadraticSpec& spec) {
  require(spec.d >= 1, ErrorKind::InvalidInput, "quadratic dimension must be >= 1");
  const std::vector<double> off(spec.d, -0.25);
  const std::vector<double> diag(spec.d, 0.5);
  std::vector<double> rhs(spec.d, 0.0);
  rhs[0] = -0.25;
  return ParamVector(BlockLayout::vector(spec.d), solve_tridiagonal(off, diag, off, rhs));
}

double quad_eigenvalue(const QuadraticSpec& spec, std::size_t j) {
  require(j >= 1 && j <= spec.d, ErrorKind::InvalidInput, "eigenvalue index out of range");
  return 0.5 * (1.0 - std::cos(static_cast<double>(j) * std::numbers::pi / static_cast<double>(spec.d + 1)));
}

QuadraticObjective::QuadraticObjective(QuadraticSpec spec)
    : spec_(spec), layout_(BlockLayout::vector(spec.d)), minimizer_(solve_exact_minimizer(spec)) {
  require(std::isfinite(spec.noise_std) && spec.noise_std >= 0.0, ErrorKind::InvalidInput,
          "noise_std must be finite and >= 0");
  optimum_ = quad_value_grad(spec_, minimizer_).value;
}

ParamVector QuadraticObjective::initial_point() const {
  ParamVector x0(layout_);
  x0[0] = std::sqrt(static_cast<double>(spec_.d));
  return x0;
}

double QuadraticObjective::value(const ParamVector& x) const { return quad_value_grad(spec_, x).value; }

ParamVector QuadraticObjective::gradient(const ParamVector& x) const { return quad_value_grad(spec_, x).grad; }

ParamVector QuadraticObjective::stochastic_gradient(const ParamVector& x, Rng& rng) const {
  return quad_stochastic_grad(spec_, x, rng);
}

void QuadraticObjective::skip_sample(Rng& rng) const { (void)draw_noise(spec_.noise_std, rng); }

ProblemConstants QuadraticObjective::constants(const NormSpec& spec) const {
  ProblemConstants c;
  c.delta0 = value(initial_point()) - optimum_;
  c.L0 = quad_eigenvalue(spec_, spec_.d);
  c.L1 = 0.0;
  c.sigma = std::sqrt(static_cast<double>(spec_.d)) * spec_.noise_std;
  c.rho = norm_equiv_rho(spec, layout_);
  return c;
}

Eigen::MatrixXd matrix_toy_target(const MatrixToySpec& spec) {
  require(spec.rows >= 1 && spec.cols >= 1, ErrorKind::InvalidInput, "matrix toy needs positive shape");
  Rng rng(spec.target_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd target(static_cast<Eigen::Index>(spec.rows), static_cast<Eigen::Index>(spec.cols));
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.cols(); ++j) target(i, j) = normal(rng);
  }
  return target;
}

namespace {

Eigen::MatrixXd toy_grad(const MatrixToySpec& spec, const Eigen::MatrixXd& target, const Eigen::MatrixXd& w,
                         Rng& rng) {
  require(w.rows() == target.rows() && w.cols() == target.cols(), ErrorKind::InvalidInput,
          "matrix toy shape mismatch");
  const double xi = draw_noise(spec.noise_std, rng);
  return (w - target).array() + xi;
}

}  // namespace

Eigen::MatrixXd matrix_toy_grad(const MatrixToySpec& spec, const Eigen::MatrixXd& w, Rng& rng) {
  return toy_grad(spec, matrix_toy_target(spec), w, rng);
}

MatrixToyObjective::MatrixToyObjective(MatrixToySpec spec)
    : spec_(spec), layout_(BlockLayout::matrix(spec.rows, spec.cols)), target_(matrix_toy_target(spec)) {
  require(std::isfinite(spec.noise_std) && spec.noise_std >= 0.0, ErrorKind::InvalidInput,
          "noise_std must be finite and >= 0");
}

ParamVector MatrixToyObjective::initial_point() const { return ParamVector(layout_); }

double MatrixToyObjective::value(const ParamVector& x) const {
  require(x.size() == layout_.total_size(), ErrorKind::InvalidInput, "matrix toy shape mismatch");
  return 0.5 * (as_matrix(x, spec_.rows, spec_.cols) - target_).squaredNorm();
}

ParamVector MatrixToyObjective::gradient(const ParamVector& x) const {
  require(x.size() == layout_.total_size(), ErrorKind::InvalidInput, "matrix toy shape mismatch");
  return from_matrix(layout_, as_matrix(x, spec_.rows, spec_.cols) - target_);
}

ParamVector MatrixToyObjective::stochastic_gradient(const ParamVector& x, Rng& rng) const {
  require(x.size() == layout_.total_size(), ErrorKind::InvalidInput, "matrix toy shape mismatch");
  return from_matrix(layout_, toy_grad(spec_, target_, as_matrix(x, spec_.rows, spec_.cols), rng));
}

void MatrixToyObjective::skip_sample(Rng& rng) const { (void)draw_noise(spec_.noise_std, rng); }

}  // namespace ringmaster
