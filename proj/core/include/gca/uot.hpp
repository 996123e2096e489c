#pragma once

#include <limits>

#include "gca/kernel.hpp"
#include "gca/solver.hpp"

namespace gca {

struct UotOptions {
  // Infinity recovers the balanced constraint on that side.
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::size_t max_iterations = 5;
  double absorption_threshold = 1e3;
  double floor = 1e-30;
  bool column_normalize = true;

  static constexpr double balanced = std::numeric_limits<double>::infinity();

  void validate() const;
};

// lambda / (lambda + eps), with the infinite weight mapping to 1.
double damped_exponent(double lambda, double epsilon);

struct UotResult {
  TransportPlan plan;
  ScalingState state;
  // Column potential in force during the final row update.
  Vector g_previous;
};

UotResult unbalanced_sinkhorn(const GibbsKernel& kernel, const Marginals& marginals,
                              const UotOptions& opts = {});

// sum a log(a/b) - a + b
double generalized_kl(const Vector& a, const Vector& b);

// <P,C> + l1 KL(P1|mu) + l2 KL(P^T 1|nu) + eps sum P log P
double uot_objective(const DenseMatrix& p, const CostMatrix& cost, double epsilon,
                     const Marginals& marginals, double lambda1, double lambda2);

}  // namespace gca
