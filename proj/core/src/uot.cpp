#include "gca/uot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gca/error.hpp"

namespace gca {

void UotOptions::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw Error(Errc::invalid_argument, "marginal relaxation weights must be non-negative");
  if (max_iterations == 0) throw Error(Errc::invalid_argument, "max_iterations must be positive");
  if (!(absorption_threshold > 1.0)) throw Error(Errc::invalid_argument, "absorption threshold must exceed 1");
  if (!(floor > 0.0)) throw Error(Errc::invalid_argument, "floor must be positive");
}

double damped_exponent(double lambda, double epsilon) {
  if (std::isinf(lambda)) return 1.0;
  return lambda / (lambda + epsilon);
}

namespace {

// exp(-f / (eps + lambda)); vanishes in the exponent for the balanced case.
double damping(double f, double epsilon, double lambda) {
  if (std::isinf(lambda)) return 1.0;
  return std::exp(-f / (epsilon + lambda));
}

void require_finite_scaling(const Vector& s, const char* which, std::size_t iteration) {
  for (double x : s)
    if (!std::isfinite(x) || !(x > 0.0))
      throw Error(Errc::overflow, std::string(which) + " scaling left the representable range at iteration " +
                                      std::to_string(iteration));
}

}  // namespace

UotResult unbalanced_sinkhorn(const GibbsKernel& kernel, const Marginals& marginals, const UotOptions& opts) {
  opts.validate();
  const std::size_t n = kernel.rows(), m = kernel.cols();
  marginals.validate(n, m);
  for (double x : kernel.values().data())
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive, "kernel entries must be positive and finite");

  const double eps = kernel.epsilon();
  const double fi1 = damped_exponent(opts.lambda1, eps);
  const double fi2 = damped_exponent(opts.lambda2, eps);
  const DenseMatrix& cost = kernel.cost().values();

  DenseMatrix kt = kernel.values();
  Vector fa(n, 0.0), ga(m, 0.0), u(n, 1.0), v(m, 1.0);
  UotResult res;
  ScalingState& st = res.state;
  st.epsilon = eps;

  auto absorb = [&] {
    const double hi = std::max(*std::max_element(u.begin(), u.end()), *std::max_element(v.begin(), v.end()));
    if (hi <= opts.absorption_threshold) return;
    for (std::size_t i = 0; i < n; ++i) fa[i] += eps * std::log(u[i]);
    for (std::size_t j = 0; j < m; ++j) ga[j] += eps * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) kt(i, j) = std::exp((fa[i] + ga[j] - cost(i, j)) / eps);
    ++st.absorptions;
  };

  res.g_previous.resize(m);
  for (std::size_t t = 1; t <= opts.max_iterations; ++t) {
    for (std::size_t j = 0; j < m; ++j) res.g_previous[j] = ga[j] + eps * std::log(v[j]);

    const Vector kv = matvec(kt, v);
    for (std::size_t i = 0; i < n; ++i)
      u[i] = damping(fa[i], eps, opts.lambda1) * std::pow(marginals.mu[i] / (kv[i] + opts.floor), fi1);
    require_finite_scaling(u, "row", t);

    const Vector ktu = matvec_t(kt, u);
    for (std::size_t j = 0; j < m; ++j)
      v[j] = damping(ga[j], eps, opts.lambda2) * std::pow(marginals.nu[j] / (ktu[j] + opts.floor), fi2);
    require_finite_scaling(v, "column", t);

    absorb();
    st.iterations = t;
    st.half_steps += 2;
  }

  TransportPlan& plan = res.plan;
  plan.epsilon = eps;
  plan.P = kt;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = plan.P.row(i);
    for (std::size_t j = 0; j < m; ++j) r[j] *= u[i] * v[j];
  }
  if (opts.column_normalize) {
    const Vector cs = col_sums(plan.P);
    Vector scale(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!(cs[j] > 0.0)) throw Error(Errc::non_positive, "column " + std::to_string(j) + " of the plan vanished");
      scale[j] = marginals.nu[j] / cs[j];
      v[j] *= scale[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto r = plan.P.row(i);
      for (std::size_t j = 0; j < m; ++j) r[j] *= scale[j];
    }
  }

  st.f.resize(n);
  st.g.resize(m);
  st.u.resize(n);
  st.v.resize(m);
  for (std::size_t i = 0; i < n; ++i) {
    st.f[i] = fa[i] + eps * std::log(u[i]);
    st.u[i] = std::exp(st.f[i] / eps);
  }
  for (std::size_t j = 0; j < m; ++j) {
    st.g[j] = ga[j] + eps * std::log(v[j]);
    st.v[j] = std::exp(st.g[j] / eps);
  }

  const MarginalError err = marginal_error(plan.P, marginals);
  plan.row_residual = err.row_l1;
  plan.col_residual = err.col_l1;
  plan.converged = false;
  return res;
}

double generalized_kl(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "generalized_kl lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) {
      if (!(b[i] > 0.0)) throw Error(Errc::support_violation, "generalized_kl: b vanishes where a does not");
      s += a[i] * std::log(a[i] / b[i]);
    }
    s += b[i] - a[i];
  }
  return s;
}

double uot_objective(const DenseMatrix& p, const CostMatrix& cost, double epsilon, const Marginals& marginals,
                     double lambda1, double lambda2) {
  require_same_shape(p, cost.values(), "uot_objective");
  if (marginals.mu.size() != p.rows() || marginals.nu.size() != p.cols())
    throw Error(Errc::dimension_mismatch, "uot_objective marginals");
  double transport = 0.0, neg_entropy = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = p.data()[k];
    if (!(x > 0.0)) throw Error(Errc::non_positive, "uot_objective needs a positive plan");
    transport += x * cost.values().data()[k];
    neg_entropy += x * std::log(x);
  }
  double value = transport + epsilon * neg_entropy;
  // An infinite weight means the constraint is enforced, not penalized.
  if (lambda1 > 0.0 && std::isfinite(lambda1)) value += lambda1 * generalized_kl(row_sums(p), marginals.mu);
  if (lambda2 > 0.0 && std::isfinite(lambda2)) value += lambda2 * generalized_kl(col_sums(p), marginals.nu);
  return value;
}

}  // namespace gca
