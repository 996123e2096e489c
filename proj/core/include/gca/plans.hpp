#pragma once

#include <vector>

#include "gca/matrix.hpp"

namespace gca {

class TargetPlan {
 public:
  TargetPlan() = default;
  TargetPlan(DenseMatrix values, double mass);

  const DenseMatrix& values() const noexcept { return values_; }
  double mass() const noexcept { return mass_; }
  std::size_t size() const noexcept { return values_.rows(); }

 private:
  DenseMatrix values_;
  double mass_ = 0.0;
};

TargetPlan identity_plan(std::size_t batch);

// I + alpha [same domain, i != j] + beta [different domain, i != j], rescaled
// to mass B unless normalize is false.
TargetPlan block_domain_plan(const std::vector<int>& domains, double alpha, double beta,
                             bool normalize = true);

TargetPlan normalize_plan(const DenseMatrix& raw, double target_mass);

}  // namespace gca
