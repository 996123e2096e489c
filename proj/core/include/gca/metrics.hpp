#pragma once

#include <vector>

#include "gca/kernel.hpp"

namespace gca {

// mean_i |z1_i - z2_i|^2
double alignment_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2);

// log mean_{i != j} exp(-t |z_i - z_j|^2)
double uniformity_loss(const EmbeddingBatch& z, double t);

// Mean distance from each point to its class centroid.
double compactness(const DenseMatrix& z, const std::vector<int>& labels);

// (sum_i C_ii - sum_i (f_i + g_i)) / eps
double kl_via_duals(const CostMatrix& cost, const Vector& f, const Vector& g, double epsilon);

}  // namespace gca
