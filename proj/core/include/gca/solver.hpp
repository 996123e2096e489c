#pragma once

#include <cstddef>
#include <vector>

#include "gca/kernel.hpp"
#include "gca/matrix.hpp"

namespace gca {

struct Marginals {
  Vector mu;
  Vector nu;

  // All-ones marginals: each sample carries mass 1.
  static Marginals uniform(std::size_t n) { return uniform(n, n); }
  static Marginals uniform(std::size_t rows, std::size_t cols);
  void validate(std::size_t rows, std::size_t cols) const;
};

enum class SolveMode { fixed_iterations, to_tolerance };

struct SolverOptions {
  std::size_t max_iterations = 5;
  double tolerance = 1e-6;
  double absorption_threshold = 1e3;
  double floor = 1e-30;
  SolveMode mode = SolveMode::fixed_iterations;
  bool stabilize = true;
  bool record_trajectory = false;
  // Ends on the row update of the last iteration, giving P^(2T-1).
  bool stop_after_row_update = false;

  void validate() const;
};

// Total potentials f = eps*log u and g = eps*log v with any absorbed part folded in.
struct ScalingState {
  Vector u;
  Vector v;
  Vector f;
  Vector g;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  std::size_t half_steps = 0;
  std::size_t absorptions = 0;
};

struct TransportPlan {
  DenseMatrix P;
  double epsilon = 0.0;
  bool converged = false;
  double row_residual = 0.0;
  double col_residual = 0.0;
};

// Snapshot after a half-step. half_step 0 is the initial state; odd values follow
// a row update, even values a column update.
struct TrajectoryPoint {
  std::size_t half_step = 0;
  Vector f;
  Vector g;
  double row_residual = 0.0;
  double col_residual = 0.0;
  double dual = 0.0;
};

struct SinkhornResult {
  TransportPlan plan;
  ScalingState state;
  std::vector<TrajectoryPoint> trajectory;
  // Column potential in force during the final row update (v^(T-1)).
  Vector g_previous;
  // Kernel with absorbed potentials folded in: exp((f_abs + g_abs - C)/eps).
  DenseMatrix absorbed_kernel;
  Vector f_absorbed;
  Vector g_absorbed;
};

// diag(mu / (P 1)) P
DenseMatrix project_rows(const DenseMatrix& p, const Vector& mu);
// P diag(nu / (P^T 1))
DenseMatrix project_cols(const DenseMatrix& p, const Vector& nu);

SinkhornResult sinkhorn(const GibbsKernel& kernel, const Marginals& marginals,
                        const SolverOptions& opts = {});

// log max_ij (u_i w_j) / (u_j w_i)
double hilbert_metric(const Vector& u, const Vector& w);

struct MarginalError {
  double row_l1 = 0.0;
  double col_l1 = 0.0;
};
MarginalError marginal_error(const DenseMatrix& p, const Marginals& marginals);

// <f~, mu> + <g~, nu> - eps * sum_ij mu_i nu_j exp((f~_i + g~_j - C_ij)/eps) + eps,
// where f~ and g~ are the potentials relative to the reference measure mu (x) nu.
double dual_objective(const Vector& f, const Vector& g, const CostMatrix& cost, double epsilon,
                      const Marginals& marginals);

// Same objective evaluated at solver potentials (plan P_ij = exp((f_i + g_j - C_ij)/eps)).
double solver_dual_objective(const Vector& f, const Vector& g, const CostMatrix& cost,
                             double epsilon, const Marginals& marginals);

// P_ij = exp((f_i + g_j - C_ij)/eps)
DenseMatrix plan_from_potentials(const Vector& f, const Vector& g, const CostMatrix& cost, double epsilon);

}  // namespace gca
