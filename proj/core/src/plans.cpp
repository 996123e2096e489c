#include "gca/plans.hpp"

#include <cmath>
#include <string>

#include "gca/error.hpp"

namespace gca {

TargetPlan::TargetPlan(DenseMatrix values, double mass) : values_(std::move(values)), mass_(mass) {
  require_square(values_, "target plan");
  for (double x : values_.data())
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(Errc::invalid_argument, "target plan entries must be non-negative");
  for (std::size_t i = 0; i < values_.rows(); ++i)
    if (!(values_(i, i) > 0.0)) throw Error(Errc::invalid_argument, "target plan diagonal must be positive");
}

TargetPlan identity_plan(std::size_t batch) {
  if (batch < 2) throw Error(Errc::invalid_argument, "identity plan needs B >= 2, got " + std::to_string(batch));
  return TargetPlan(DenseMatrix::identity(batch), static_cast<double>(batch));
}

TargetPlan block_domain_plan(const std::vector<int>& domains, double alpha, double beta, bool normalize) {
  if (domains.empty()) throw Error(Errc::invalid_argument, "block_domain_plan needs at least one domain label");
  if (!(alpha >= 0.0) || !(beta >= 0.0))
    throw Error(Errc::invalid_argument, "alpha and beta must be non-negative");
  const std::size_t b = domains.size();
  DenseMatrix raw(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      raw(i, j) = i == j ? 1.0 : (domains[i] == domains[j] ? alpha : beta);
  if (!normalize) return TargetPlan(raw, total(raw));
  return normalize_plan(raw, static_cast<double>(b));
}

TargetPlan normalize_plan(const DenseMatrix& raw, double target_mass) {
  if (!(target_mass > 0.0)) throw Error(Errc::invalid_argument, "target mass must be positive");
  const double mass = total(raw);
  if (!(mass > 0.0)) throw Error(Errc::invalid_argument, "cannot normalize a zero plan");
  DenseMatrix out = raw;
  if (mass != target_mass) {
    const double scale = target_mass / mass;
    for (double& x : out.data()) x *= scale;
  }
  return TargetPlan(std::move(out), target_mass);
}

}  // namespace gca
