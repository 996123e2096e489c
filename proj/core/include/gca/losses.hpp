#pragma once

#include <optional>
#include <string_view>

#include "gca/kernel.hpp"
#include "gca/plans.hpp"
#include "gca/solver.hpp"

namespace gca {

enum class LossKind { ince, gca_ince, rince, gca_rince, gca_uot, byol };

std::string_view loss_name(LossKind kind) noexcept;
std::optional<LossKind> parse_loss_kind(std::string_view name) noexcept;

struct RinceParams {
  double q = 0.98;
  double lambda = 0.01;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  // Gradients w.r.t. the raw (pre-normalization) rows.
  DenseMatrix grad_z1;
  DenseMatrix grad_z2;
  // Gradients w.r.t. the unit rows.
  DenseMatrix unit_grad_z1;
  DenseMatrix unit_grad_z2;
  DenseMatrix plan;
  ScalingState scaling;
};

// Generalized KL with 0 log 0 = 0: sum Pt log(Pt/P) - Pt + P.
double kl_plan_divergence(const DenseMatrix& target, const DenseMatrix& p);
double kl_plan_divergence(const TargetPlan& target, const DenseMatrix& p);

LossResult ince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon);

struct GcaInceOptions {
  std::size_t iterations = 5;
  // Stops after the first row projection.
  bool half_step = false;
  std::optional<TargetPlan> target;
  double absorption_threshold = 1e3;
};

LossResult gca_ince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                         const GcaInceOptions& opts = {});

LossResult rince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                      const RinceParams& params = {});

// -(1/q)(diag(P)/u)^q + (1/q)(lambda/u)^q at the first row projection. Equals
// exp(-q/eps) times rince_loss.
double rince_proximal_form(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                           const RinceParams& params = {});

LossResult gca_rince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                          const RinceParams& params = {}, std::size_t iterations = 5);

struct GcaUotOptions {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  RinceParams rince;
  double weight = 0.5;
  std::size_t iterations = 5;
  std::optional<TargetPlan> target;
  double absorption_threshold = 1e3;
};

LossResult gca_uot_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                        const GcaUotOptions& opts = {});

// sum |q_i - z_i|^2; Z2 is a stop-gradient target.
LossResult byol_loss(const EmbeddingBatch& q, const EmbeddingBatch& z2);

struct LossConfig {
  LossKind kind = LossKind::gca_ince;
  double epsilon = 0.5;
  std::size_t iterations = 5;
  bool half_step = false;
  RinceParams rince;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double weight = 0.5;
  std::optional<TargetPlan> target;
  double absorption_threshold = 1e3;

  void validate() const;
};

LossResult evaluate_loss(const LossConfig& config, const EmbeddingBatch& z1, const EmbeddingBatch& z2);

// Max relative error ||analytic - numeric||_inf / ||numeric||_inf between the analytic
// gradient and central differences of the loss re-evaluated with the scalings frozen
// at the base point. Inputs are raw rows; each perturbed copy is re-normalized.
double loss_grad_check(const LossConfig& config, const DenseMatrix& z1_raw, const DenseMatrix& z2_raw,
                       double step = 1e-6);

}  // namespace gca
