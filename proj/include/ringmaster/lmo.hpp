// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace ringmaster {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VectorShape {
  std::size_t length = 0;
  bool operator==(const VectorShape&) const = default;
};

/// Matrix blocks are stored row-major inside the flat parameter array.
struct MatrixShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const MatrixShape&) const = default;
};

using BlockShape = std::variant<VectorShape, MatrixShape>;

[[nodiscard]] std::size_t element_count(const BlockShape& shape) noexcept;

/// Ordered partition of a flat parameter vector into vector and matrix blocks.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<BlockShape> blocks);

  static BlockLayout vector(std::size_t length);
  static BlockLayout matrix(std::size_t rows, std::size_t cols);

  [[nodiscard]] const std::vector<BlockShape>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] std::size_t block_count() const noexcept { return blocks_.size(); }
  [[nodiscard]] std::size_t offset(std::size_t block) const { return offsets_.at(block); }
  [[nodiscard]] std::size_t total_size() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }

  bool operator==(const BlockLayout& other) const { return blocks_ == other.blocks_; }

 private:
  std::vector<BlockShape> blocks_;
  std::vector<std::size_t> offsets_;
};

/// Flat, finite parameter state (iterates, momenta, gradients) with its block structure.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(BlockLayout layout);
  ParamVector(BlockLayout layout, std::vector<double> data);

  [[nodiscard]] const BlockLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  [[nodiscard]] std::span<double> block(std::size_t b);
  [[nodiscard]] std::span<const double> block(std::size_t b) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] bool all_finite() const noexcept;

  bool operator==(const ParamVector& other) const = default;

 private:
  BlockLayout layout_;
  std::vector<double> data_;
};

[[nodiscard]] double dot(const ParamVector& a, const ParamVector& b);

enum class NormKind { Euclidean, MaxAbs, Spectral };

/// Polynomial schedule used by the Newton–Schulz orthogonalization.
///  - Tuned: per-iteration minimax quintics that converge to the polar factor.
///  - Muon: the fixed (3.4445, -4.7750, 2.0315) map, which only lands singular
///    values in a band around 1.
enum class NsCoefficients { Tuned, Muon };

struct ExactSvd {
  bool operator==(const ExactSvd&) const = default;
};

struct NewtonSchulz {
  int iterations = 5;
  NsCoefficients coefficients = NsCoefficients::Tuned;
  bool operator==(const NewtonSchulz&) const = default;
};

using SpectralBackend = std::variant<ExactSvd, NewtonSchulz>;

/// One norm per block; the overall primal norm is the max over blocks, so its dual is the sum.
struct NormSpec {
  std::vector<NormKind> kinds;
  SpectralBackend spectral = ExactSvd{};

  static NormSpec uniform(NormKind kind, const BlockLayout& layout, SpectralBackend backend = ExactSvd{});

  /// Throws InvalidInput when the spec does not fit `layout`.
  void validate(const BlockLayout& layout) const;

  bool operator==(const NormSpec&) const = default;
};

// Single-block oracles. All return lmo(0) = 0.

[[nodiscard]] std::vector<double> lmo_euclidean(std::span<const double> y);
[[nodiscard]] std::vector<double> lmo_sign(std::span<const double> y);

/// -U V^T over singular values above 1e-12 * sigma_max.
[[nodiscard]] Eigen::MatrixXd lmo_spectral_exact(const Eigen::MatrixXd& y);

[[nodiscard]] Eigen::MatrixXd lmo_spectral_ns(const Eigen::MatrixXd& y, int iterations,
                                              NsCoefficients coefficients = NsCoefficients::Tuned);

[[nodiscard]] double nuclear_norm(const Eigen::MatrixXd& y);
[[nodiscard]] double operator_norm(const Eigen::MatrixXd& y);

[[nodiscard]] double block_dual_norm(std::span<const double> y, const BlockShape& shape, NormKind kind);
[[nodiscard]] double block_primal_norm(std::span<const double> y, const BlockShape& shape, NormKind kind);

[[nodiscard]] double dual_norm(const ParamVector& y, const NormSpec& spec);
[[nodiscard]] double primal_norm(const ParamVector& y, const NormSpec& spec);

[[nodiscard]] ParamVector blockwise_lmo(const ParamVector& y, const NormSpec& spec);

/// sup_{z != 0} ||z||_* / ||z||_2 for the blockwise norm.
[[nodiscard]] double norm_equiv_rho(const NormSpec& spec, const BlockLayout& layout);

}  // namespace ringmaster
