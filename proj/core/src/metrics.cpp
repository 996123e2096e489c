#include "gca/metrics.hpp"

#include <cmath>
#include <algorithm>
#include <string>

#include "gca/error.hpp"

namespace gca {

double alignment_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2) {
  require_same_shape(z1.unit(), z2.unit(), "alignment_loss");
  if (z1.batch() == 0) throw Error(Errc::invalid_argument, "alignment_loss of an empty batch");
  double s = 0.0;
  for (std::size_t n = 0; n < z1.unit().size(); ++n) {
    const double d = z1.unit().data()[n] - z2.unit().data()[n];
    s += d * d;
  }
  return s / static_cast<double>(z1.batch());
}

double uniformity_loss(const EmbeddingBatch& z, double t) {
  const std::size_t b = z.batch();
  if (b < 2) throw Error(Errc::invalid_argument, "uniformity_loss needs B >= 2");
  const CostMatrix sq = sqeuclidean_cost(z, z);
  // Log-sum-exp over the off-diagonal pairs.
  double mx = -INFINITY;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j) mx = std::max(mx, -t * sq(i, j));
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j) s += std::exp(-t * sq(i, j) - mx);
  return mx + std::log(s / static_cast<double>(b * (b - 1)));
}

// Labels are class indices 0..k-1; every index up to the largest must occur.
double compactness(const DenseMatrix& z, const std::vector<int>& labels) {
  if (labels.size() != z.rows())
    throw Error(Errc::dimension_mismatch, "compactness: " + std::to_string(labels.size()) + " labels for " +
                                              std::to_string(z.rows()) + " points");
  if (z.rows() == 0) throw Error(Errc::empty_class, "compactness of an empty set");
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw Error(Errc::invalid_argument, "negative class label");
    k = std::max(k, l + 1);
  }
  DenseMatrix centroids(static_cast<std::size_t>(k), z.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto c = centroids.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t j = 0; j < z.cols(); ++j) c[j] += z(i, j);
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error(Errc::empty_class, "class " + std::to_string(c) + " has no points");
    for (double& x : centroids.row(c)) x /= static_cast<double>(counts[c]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto c = centroids.row(static_cast<std::size_t>(labels[i]));
    double d2 = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) d2 += (z(i, j) - c[j]) * (z(i, j) - c[j]);
    s += std::sqrt(d2);
  }
  return s / static_cast<double>(z.rows());
}

double kl_via_duals(const CostMatrix& cost, const Vector& f, const Vector& g, double epsilon) {
  const std::size_t b = cost.size();
  if (cost.values().cols() != b || f.size() != b || g.size() != b)
    throw Error(Errc::dimension_mismatch, "kl_via_duals shapes");
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i) s += cost(i, i) - f[i] - g[i];
  return s / epsilon;
}

}  // namespace gca
