#include "gca/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gca/error.hpp"

namespace gca {

EmbeddingBatch normalize_rows(const DenseMatrix& raw) {
  if (!raw.all_finite()) throw Error(Errc::non_finite, "embedding contains non-finite values");
  EmbeddingBatch b;
  b.unit_ = raw;
  b.norms_.resize(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto r = b.unit_.row(i);
    const double n = std::sqrt(dot(r, r));
    if (n == 0.0) throw Error(Errc::zero_row, "row " + std::to_string(i) + " has zero norm");
    for (double& x : r) x /= n;
    b.norms_[i] = n;
  }
  return b;
}

DenseMatrix normalize_rows_backward(const EmbeddingBatch& batch, const DenseMatrix& grad_unit) {
  require_same_shape(batch.unit(), grad_unit, "normalize_rows_backward");
  DenseMatrix out(grad_unit.rows(), grad_unit.cols());
  for (std::size_t i = 0; i < grad_unit.rows(); ++i) {
    const auto z = batch.unit().row(i);
    const auto g = grad_unit.row(i);
    const double zg = dot(z, g);
    const double inv = 1.0 / batch.norms()[i];
    auto o = out.row(i);
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = (g[k] - z[k] * zg) * inv;
  }
  return out;
}

CostMatrix::CostMatrix(DenseMatrix values) : values_(std::move(values)) {
  if (!values_.all_finite()) throw Error(Errc::non_finite, "cost matrix contains non-finite values");
}

static void require_matching(const EmbeddingBatch& a, const EmbeddingBatch& b, const char* what) {
  if (a.batch() != b.batch() || a.dim() != b.dim())
    throw Error(Errc::dimension_mismatch,
                std::string(what) + ": " + std::to_string(a.batch()) + "x" + std::to_string(a.dim()) +
                    " vs " + std::to_string(b.batch()) + "x" + std::to_string(b.dim()));
}

CostMatrix cosine_cost(const EmbeddingBatch& z1, const EmbeddingBatch& z2) {
  require_matching(z1, z2, "cosine_cost");
  DenseMatrix c = matmul_nt(z1.unit(), z2.unit());
  for (double& x : c.data()) x = std::clamp(1.0 - x, 0.0, 2.0);
  return CostMatrix(std::move(c));
}

CostMatrix sqeuclidean_cost(const EmbeddingBatch& z1, const EmbeddingBatch& z2) {
  require_matching(z1, z2, "sqeuclidean_cost");
  DenseMatrix c(z1.batch(), z2.batch());
  for (std::size_t i = 0; i < z1.batch(); ++i) {
    const auto a = z1.unit().row(i);
    for (std::size_t j = 0; j < z2.batch(); ++j) {
      const auto b = z2.unit().row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      c(i, j) = s;
    }
  }
  return CostMatrix(std::move(c));
}

static void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(Errc::invalid_argument, "epsilon must be positive and finite, got " + std::to_string(epsilon));
}

GibbsKernel GibbsKernel::from_cost(CostMatrix cost, double epsilon) {
  require_epsilon(epsilon);
  GibbsKernel k;
  k.kernel_ = cost.values();
  for (double& x : k.kernel_.data()) x = std::exp(-x / epsilon);
  for (double x : k.kernel_.data())
    if (!(x > 0.0)) throw Error(Errc::non_positive, "kernel underflowed to zero; raise epsilon");
  k.cost_ = std::move(cost);
  k.epsilon_ = epsilon;
  return k;
}

GibbsKernel GibbsKernel::from_values(DenseMatrix kernel, double epsilon) {
  require_epsilon(epsilon);
  DenseMatrix cost = kernel;
  for (double& x : cost.data()) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive, "kernel entries must be positive and finite");
    x = -epsilon * std::log(x);
  }
  GibbsKernel k;
  k.kernel_ = std::move(kernel);
  k.cost_ = CostMatrix(std::move(cost));
  k.epsilon_ = epsilon;
  return k;
}

GibbsKernel gibbs_kernel(const CostMatrix& cost, double epsilon) {
  return GibbsKernel::from_cost(cost, epsilon);
}

GibbsKernel byol_kernel(const EmbeddingBatch& q, const EmbeddingBatch& z2) {
  CostMatrix sq = sqeuclidean_cost(q, z2);
  DenseMatrix dist = sq.values();
  for (double& x : dist.data()) x = std::sqrt(x);
  return GibbsKernel::from_cost(CostMatrix(std::move(dist)), 1.0);
}

}  // namespace gca
