// SPDX-License-Identifier: Apache-2.0
#include "ringmaster/lmo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "ringmaster/error.hpp"

namespace ringmaster {
namespace {

using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;

bool finite(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(std::span<const double> y) {
  require(finite(y), ErrorKind::InvalidInput, "non-finite input to norm oracle");
}

void require_finite(const Eigen::MatrixXd& y) {
  require(y.allFinite(), ErrorKind::InvalidInput, "non-finite input to norm oracle");
}

double euclidean(std::span<const double> y) {
  // Scaled accumulation keeps tiny and huge inputs representable.
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double v : y) {
    const double s = v / scale;
    sum += s * s;
  }
  return scale * std::sqrt(sum);
}

void euclidean_into(std::span<const double> y, std::span<double> out) {
  const double norm = euclidean(y);
  if (norm == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = -y[i] / norm;
}

void sign_into(std::span<const double> y, std::span<double> out) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] > 0.0 ? -1.0 : (y[i] < 0.0 ? 1.0 : 0.0);
  }
}

// Minimax quintics for singular values in [0.05, 1] after spectral pre-scaling.
// Each step satisfies p(1) = 1 and |1 - p(x)| <= |1 - x| on its input interval,
// so no singular value moves away from 1.
constexpr std::array<std::array<double, 3>, 5> kTunedQuintics{{
    {4.2308127236945365, -6.4664696104481854, 3.2356568867536479},
    {2.9554440873737615, -2.9281166406389292, 0.97267255326516777},
    {2.062534310863176, -1.4703210663339084, 0.4077867554707329},
    {1.878081820824147, -1.2536914609013454, 0.37560964007719844},
    {1.5000653118028435, -0.50006531180284375, 0.0},
}};
constexpr std::array<double, 3> kConvergentQuintic{15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0};
constexpr std::array<double, 3> kMuonQuintic{3.4445, -4.7750, 2.0315};

std::array<double, 3> ns_coefficients(NsCoefficients kind, int step) {
  if (kind == NsCoefficients::Muon) return kMuonQuintic;
  if (step < static_cast<int>(kTunedQuintics.size())) return kTunedQuintics[static_cast<std::size_t>(step)];
  return kConvergentQuintic;
}

Eigen::MatrixXd ns_wide(Eigen::MatrixXd x, int iterations, NsCoefficients kind) {
  // x is rows <= cols, so the Gram matrix x x^T is the small one.
  x /= x.norm();
  if (kind == NsCoefficients::Tuned) {
    const Eigen::MatrixXd gram = x * x.transpose();
    const double scale = std::sqrt(std::sqrt((gram * gram).norm()));
    if (scale > 0.0) x /= scale;
  }
  for (int step = 0; step < iterations; ++step) {
    const auto [a, b, c] = ns_coefficients(kind, step);
    const Eigen::MatrixXd gram = x * x.transpose();
    const Eigen::MatrixXd poly = b * gram + c * (gram * gram);
    x = a * x + poly * x;
  }
  return -x;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& y) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(y);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "SVD did not converge");
  }
  return svd.singularValues();
}

void lmo_block_into(std::span<const double> y, const BlockShape& shape, NormKind kind,
                    const SpectralBackend& backend, std::span<double> out) {
  switch (kind) {
    case NormKind::Euclidean: euclidean_into(y, out); return;
    case NormKind::MaxAbs: sign_into(y, out); return;
    case NormKind::Spectral: {
      const auto& m = std::get<MatrixShape>(shape);
      const Eigen::MatrixXd ym = ConstMatrixMap(y.data(), static_cast<Eigen::Index>(m.rows),
                                                static_cast<Eigen::Index>(m.cols));
      Eigen::MatrixXd dir;
      if (const auto* ns = std::get_if<NewtonSchulz>(&backend)) {
        dir = lmo_spectral_ns(ym, ns->iterations, ns->coefficients);
      } else {
        dir = lmo_spectral_exact(ym);
      }
      MatrixMap(out.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)) = dir;
      return;
    }
  }
}

}  // namespace

std::size_t element_count(const BlockShape& shape) noexcept {
  return std::visit(
      [](const auto& s) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, VectorShape>) {
          return s.length;
        } else {
          return s.rows * s.cols;
        }
      },
      shape);
}

BlockLayout::BlockLayout(std::vector<BlockShape> blocks) : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size() + 1);
  offsets_.push_back(0);
  for (const auto& b : blocks_) {
    const std::size_t n = element_count(b);
    require(n > 0, ErrorKind::InvalidInput, "block with zero elements");
    offsets_.push_back(offsets_.back() + n);
  }
}

BlockLayout BlockLayout::vector(std::size_t length) { return BlockLayout({VectorShape{length}}); }

BlockLayout BlockLayout::matrix(std::size_t rows, std::size_t cols) {
  return BlockLayout({MatrixShape{rows, cols}});
}

ParamVector::ParamVector(BlockLayout layout) : layout_(std::move(layout)), data_(layout_.total_size(), 0.0) {}

ParamVector::ParamVector(BlockLayout layout, std::vector<double> data)
    : layout_(std::move(layout)), data_(std::move(data)) {
  require(data_.size() == layout_.total_size(), ErrorKind::InvalidInput,
          "parameter data length does not match layout");
  require(all_finite(), ErrorKind::InvalidInput, "parameter data must be finite");
}

std::span<double> ParamVector::block(std::size_t b) {
  return std::span<double>(data_).subspan(layout_.offset(b), layout_.offset(b + 1) - layout_.offset(b));
}

std::span<const double> ParamVector::block(std::size_t b) const {
  return std::span<const double>(data_).subspan(layout_.offset(b), layout_.offset(b + 1) - layout_.offset(b));
}

bool ParamVector::all_finite() const noexcept { return finite(data_); }

double dot(const ParamVector& a, const ParamVector& b) {
  require(a.size() == b.size(), ErrorKind::InvalidInput, "dot of mismatched vectors");
  return std::inner_product(a.values().begin(), a.values().end(), b.values().begin(), 0.0);
}

NormSpec NormSpec::uniform(NormKind kind, const BlockLayout& layout, SpectralBackend backend) {
  NormSpec spec{std::vector<NormKind>(layout.block_count(), kind), backend};
  spec.validate(layout);
  return spec;
}

void NormSpec::validate(const BlockLayout& layout) const {
  require(kinds.size() == layout.block_count(), ErrorKind::InvalidInput,
          "norm spec block count does not match layout");
  for (std::size_t b = 0; b < kinds.size(); ++b) {
    if (kinds[b] == NormKind::Spectral) {
      require(std::holds_alternative<MatrixShape>(layout.blocks()[b]), ErrorKind::InvalidInput,
              "spectral norm assigned to a vector block");
    }
  }
  if (const auto* ns = std::get_if<NewtonSchulz>(&spectral)) {
    require(ns->iterations > 0, ErrorKind::InvalidInput, "Newton-Schulz needs at least one iteration");
  }
}

std::vector<double> lmo_euclidean(std::span<const double> y) {
  require_finite(y);
  std::vector<double> out(y.size());
  euclidean_into(y, out);
  return out;
}

std::vector<double> lmo_sign(std::span<const double> y) {
  require_finite(y);
  std::vector<double> out(y.size());
  sign_into(y, out);
  return out;
}

Eigen::MatrixXd lmo_spectral_exact(const Eigen::MatrixXd& y) {
  require_finite(y);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  if (y.size() == 0 || y.isZero(0.0)) return out;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "SVD did not converge");
  }
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-12 * sv(0);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cutoff) break;
    out.noalias() -= svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
  }
  return out;
}

Eigen::MatrixXd lmo_spectral_ns(const Eigen::MatrixXd& y, int iterations, NsCoefficients coefficients) {
  require_finite(y);
  require(iterations > 0, ErrorKind::InvalidInput, "Newton-Schulz needs at least one iteration");
  if (y.size() == 0 || y.isZero(0.0)) return Eigen::MatrixXd::Zero(y.rows(), y.cols());
  if (y.rows() > y.cols()) {
    return ns_wide(y.transpose(), iterations, coefficients).transpose();
  }
  return ns_wide(y, iterations, coefficients);
}

double nuclear_norm(const Eigen::MatrixXd& y) {
  require_finite(y);
  if (y.size() == 0) return 0.0;
  return singular_values(y).sum();
}

double operator_norm(const Eigen::MatrixXd& y) {
  require_finite(y);
  if (y.size() == 0) return 0.0;
  return singular_values(y)(0);
}

double block_dual_norm(std::span<const double> y, const BlockShape& shape, NormKind kind) {
  require_finite(y);
  switch (kind) {
    case NormKind::Euclidean: return euclidean(y);
    case NormKind::MaxAbs: {
      double sum = 0.0;
      for (double v : y) sum += std::abs(v);
      return sum;
    }
    case NormKind::Spectral: {
      const auto& m = std::get<MatrixShape>(shape);
      return nuclear_norm(ConstMatrixMap(y.data(), static_cast<Eigen::Index>(m.rows),
                                         static_cast<Eigen::Index>(m.cols)));
    }
  }
  return 0.0;
}

double block_primal_norm(std::span<const double> y, const BlockShape& shape, NormKind kind) {
  require_finite(y);
  switch (kind) {
    case NormKind::Euclidean: return euclidean(y);
    case NormKind::MaxAbs: {
      double best = 0.0;
      for (double v : y) best = std::max(best, std::abs(v));
      return best;
    }
    case NormKind::Spectral: {
      const auto& m = std::get<MatrixShape>(shape);
      return operator_norm(ConstMatrixMap(y.data(), static_cast<Eigen::Index>(m.rows),
                                          static_cast<Eigen::Index>(m.cols)));
    }
  }
  return 0.0;
}

double dual_norm(const ParamVector& y, const NormSpec& spec) {
  spec.validate(y.layout());
  double total = 0.0;
  for (std::size_t b = 0; b < spec.kinds.size(); ++b) {
    total += block_dual_norm(y.block(b), y.layout().blocks()[b], spec.kinds[b]);
  }
  return total;
}

double primal_norm(const ParamVector& y, const NormSpec& spec) {
  spec.validate(y.layout());
  double best = 0.0;
  for (std::size_t b = 0; b < spec.kinds.size(); ++b) {
    best = std::max(best, block_primal_norm(y.block(b), y.layout().blocks()[b], spec.kinds[b]));
  }
  return best;
}

ParamVector blockwise_lmo(const ParamVector& y, const NormSpec& spec) {
  spec.validate(y.layout());
  require(y.all_finite(), ErrorKind::InvalidInput, "non-finite input to norm oracle");
  ParamVector out(y.layout());
  for (std::size_t b = 0; b < spec.kinds.size(); ++b) {
    lmo_block_into(y.block(b), y.layout().blocks()[b], spec.kinds[b], spec.spectral, out.block(b));
  }
  return out;
}

double norm_equiv_rho(const NormSpec& spec, const BlockLayout& layout) {
  spec.validate(layout);
  double sum_sq = 0.0;
  for (std::size_t b = 0; b < spec.kinds.size(); ++b) {
    const auto& shape = layout.blocks()[b];
    switch (spec.kinds[b]) {
      case NormKind::Euclidean: sum_sq += 1.0; break;
      case NormKind::MaxAbs: sum_sq += static_cast<double>(element_count(shape)); break;
      case NormKind::Spectral: {
        const auto& m = std::get<MatrixShape>(shape);
        sum_sq += static_cast<double>(std::min(m.rows, m.cols));
        break;
      }
    }
  }
  return std::sqrt(sum_sq);
}

}  // namespace ringmaster
