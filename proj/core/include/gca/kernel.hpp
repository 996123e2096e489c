#pragma once

#include "gca/matrix.hpp"

namespace gca {

// Unit-norm embedding rows plus the norms they were scaled by, so gradients
// with respect to the unit rows can be pulled back to the raw rows.
class EmbeddingBatch {
 public:
  EmbeddingBatch() = default;

  std::size_t batch() const noexcept { return unit_.rows(); }
  std::size_t dim() const noexcept { return unit_.cols(); }
  const DenseMatrix& unit() const noexcept { return unit_; }
  const Vector& norms() const noexcept { return norms_; }

 private:
  friend EmbeddingBatch normalize_rows(const DenseMatrix& raw);
  DenseMatrix unit_;
  Vector norms_;
};

EmbeddingBatch normalize_rows(const DenseMatrix& raw);

// Pulls a gradient w.r.t. unit rows back through z -> z/|z|: (I - zz^T) g / |z|.
DenseMatrix normalize_rows_backward(const EmbeddingBatch& batch, const DenseMatrix& grad_unit);

class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(DenseMatrix values);

  const DenseMatrix& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

 private:
  DenseMatrix values_;
};

// C_ij = 1 - <z1_i, z2_j>, clamped to [0, 2].
CostMatrix cosine_cost(const EmbeddingBatch& z1, const EmbeddingBatch& z2);
// C_ij = |z1_i - z2_j|^2
CostMatrix sqeuclidean_cost(const EmbeddingBatch& z1, const EmbeddingBatch& z2);

class GibbsKernel {
 public:
  GibbsKernel() = default;

  static GibbsKernel from_cost(CostMatrix cost, double epsilon);
  // Accepts a strictly positive kernel directly; the cost is recovered as -eps*log K.
  static GibbsKernel from_values(DenseMatrix kernel, double epsilon);

  const DenseMatrix& values() const noexcept { return kernel_; }
  const CostMatrix& cost() const noexcept { return cost_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t rows() const noexcept { return kernel_.rows(); }
  std::size_t cols() const noexcept { return kernel_.cols(); }

 private:
  DenseMatrix kernel_;
  CostMatrix cost_;
  double epsilon_ = 0.0;
};

GibbsKernel gibbs_kernel(const CostMatrix& cost, double epsilon);

// S_ij = exp(-|q_i - z_j|), unsquared norm.
GibbsKernel byol_kernel(const EmbeddingBatch& q, const EmbeddingBatch& z2);

}  // namespace gca
