#include "gca/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gca/error.hpp"

namespace gca {

Marginals Marginals::uniform(std::size_t rows, std::size_t cols) {
  return {Vector(rows, 1.0), Vector(cols, 1.0)};
}

void Marginals::validate(std::size_t rows, std::size_t cols) const {
  if (mu.size() != rows || nu.size() != cols)
    throw Error(Errc::dimension_mismatch, "marginals have lengths " + std::to_string(mu.size()) + "/" +
                                              std::to_string(nu.size()) + ", kernel is " +
                                              std::to_string(rows) + "x" + std::to_string(cols));
  for (double x : mu)
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive, "mu entries must be positive");
  for (double x : nu)
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive, "nu entries must be positive");
}

void SolverOptions::validate() const {
  if (max_iterations == 0) throw Error(Errc::invalid_argument, "max_iterations must be positive");
  if (!(tolerance > 0.0)) throw Error(Errc::invalid_argument, "tolerance must be positive");
  if (!(absorption_threshold > 1.0)) throw Error(Errc::invalid_argument, "absorption threshold must exceed 1");
  if (!(floor > 0.0)) throw Error(Errc::invalid_argument, "floor must be positive");
}

DenseMatrix project_rows(const DenseMatrix& p, const Vector& mu) {
  if (mu.size() != p.rows()) throw Error(Errc::dimension_mismatch, "project_rows: mu length");
  DenseMatrix out = p;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = out.row(i);
    const double s = sum(r);
    if (!(s > 0.0)) throw Error(Errc::non_positive, "row " + std::to_string(i) + " sums to zero");
    const double scale = mu[i] / s;
    for (double& x : r) x *= scale;
  }
  return out;
}

DenseMatrix project_cols(const DenseMatrix& p, const Vector& nu) {
  if (nu.size() != p.cols()) throw Error(Errc::dimension_mismatch, "project_cols: nu length");
  const Vector s = col_sums(p);
  Vector scale(p.cols());
  for (std::size_t j = 0; j < p.cols(); ++j) {
    if (!(s[j] > 0.0)) throw Error(Errc::non_positive, "column " + std::to_string(j) + " sums to zero");
    scale[j] = nu[j] / s[j];
  }
  DenseMatrix out = p;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= scale[j];
  }
  return out;
}

namespace {

void require_positive_kernel(const DenseMatrix& k) {
  for (double x : k.data())
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive, "kernel entries must be positive and finite");
}

void require_scaling_finite(const Vector& s, const char* which, std::size_t iteration) {
  for (double x : s)
    if (!std::isfinite(x) || !(x > 0.0))
      throw Error(Errc::overflow, std::string(which) + " scaling left the representable range at iteration " +
                                      std::to_string(iteration));
}

double l1_residual(const Vector& got, const Vector& want) {
  double r = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) r += std::abs(got[i] - want[i]);
  return r;
}

double max_of(const Vector& x) { return *std::max_element(x.begin(), x.end()); }

// Linear part of the dual with potentials taken relative to mu (x) nu.
double dual_linear_part(const Vector& f, const Vector& g, double epsilon, const Marginals& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += m.mu[i] * (f[i] - epsilon * std::log(m.mu[i]));
  for (std::size_t j = 0; j < g.size(); ++j) s += m.nu[j] * (g[j] - epsilon * std::log(m.nu[j]));
  return s;
}

}  // namespace

SinkhornResult sinkhorn(const GibbsKernel& kernel, const Marginals& marginals, const SolverOptions& opts) {
  opts.validate();
  const std::size_t n = kernel.rows(), m = kernel.cols();
  marginals.validate(n, m);
  require_positive_kernel(kernel.values());

  const double eps = kernel.epsilon();
  const DenseMatrix& cost = kernel.cost().values();

  SinkhornResult res;
  DenseMatrix& kt = res.absorbed_kernel;
  kt = kernel.values();
  Vector& fa = res.f_absorbed;
  Vector& ga = res.g_absorbed;
  fa.assign(n, 0.0);
  ga.assign(m, 0.0);
  Vector u(n, 1.0), v(m, 1.0);
  ScalingState& st = res.state;
  st.epsilon = eps;

  auto potentials = [&](Vector& f, Vector& g) {
    f.resize(n);
    g.resize(m);
    for (std::size_t i = 0; i < n; ++i) f[i] = fa[i] + eps * std::log(u[i]);
    for (std::size_t j = 0; j < m; ++j) g[j] = ga[j] + eps * std::log(v[j]);
  };

  auto absorb = [&] {
    if (!opts.stabilize) return;
    if (max_of(u) <= opts.absorption_threshold && max_of(v) <= opts.absorption_threshold) return;
    for (std::size_t i = 0; i < n; ++i) fa[i] += eps * std::log(u[i]);
    for (std::size_t j = 0; j < m; ++j) ga[j] += eps * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) kt(i, j) = std::exp((fa[i] + ga[j] - cost(i, j)) / eps);
    ++st.absorptions;
  };

  // Row and column sums of diag(u) kt diag(v), without forming the plan.
  auto residuals = [&](double& row_res, double& col_res, double& mass) {
    Vector kv = matvec(kt, v);
    Vector ktu = matvec_t(kt, u);
    Vector rs(n), cs(m);
    mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rs[i] = u[i] * kv[i];
      mass += rs[i];
    }
    for (std::size_t j = 0; j < m; ++j) cs[j] = v[j] * ktu[j];
    row_res = l1_residual(rs, marginals.mu);
    col_res = l1_residual(cs, marginals.nu);
  };

  auto record = [&] {
    if (!opts.record_trajectory) return;
    TrajectoryPoint p;
    p.half_step = st.half_steps;
    potentials(p.f, p.g);
    double mass = 0.0;
    residuals(p.row_residual, p.col_residual, mass);
    p.dual = dual_linear_part(p.f, p.g, eps, marginals) - eps * mass + eps;
    res.trajectory.push_back(std::move(p));
  };

  record();
  bool converged = false;
  for (std::size_t t = 1; t <= opts.max_iterations; ++t) {
    res.g_previous.resize(m);
    for (std::size_t j = 0; j < m; ++j) res.g_previous[j] = ga[j] + eps * std::log(v[j]);

    const Vector kv = matvec(kt, v);
    for (std::size_t i = 0; i < n; ++i) u[i] = marginals.mu[i] / (kv[i] + opts.floor);
    require_scaling_finite(u, "row", t);
    absorb();
    ++st.half_steps;
    st.iterations = t;
    record();
    if (opts.stop_after_row_update && t == opts.max_iterations) break;

    const Vector ktu = matvec_t(kt, u);
    for (std::size_t j = 0; j < m; ++j) v[j] = marginals.nu[j] / (ktu[j] + opts.floor);
    require_scaling_finite(v, "column", t);
    absorb();
    ++st.half_steps;
    record();

    if (opts.mode == SolveMode::to_tolerance) {
      double row_res = 0.0, col_res = 0.0, mass = 0.0;
      residuals(row_res, col_res, mass);
      if (std::max(row_res, col_res) <= opts.tolerance) {
        converged = true;
        break;
      }
    }
  }

  potentials(st.f, st.g);
  st.u.resize(n);
  st.v.resize(m);
  for (std::size_t i = 0; i < n; ++i) st.u[i] = std::exp(st.f[i] / eps);
  for (std::size_t j = 0; j < m; ++j) st.v[j] = std::exp(st.g[j] / eps);

  TransportPlan& plan = res.plan;
  plan.epsilon = eps;
  plan.P = kt;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = plan.P.row(i);
    for (std::size_t j = 0; j < m; ++j) r[j] *= u[i] * v[j];
  }
  const MarginalError err = marginal_error(plan.P, marginals);
  plan.row_residual = err.row_l1;
  plan.col_residual = err.col_l1;
  plan.converged = converged || std::max(err.row_l1, err.col_l1) <= opts.tolerance;
  return res;
}

double hilbert_metric(const Vector& u, const Vector& w) {
  if (u.size() != w.size() || u.empty()) throw Error(Errc::dimension_mismatch, "hilbert_metric lengths");
  double hi = -INFINITY, lo = INFINITY;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0) || !(w[i] > 0.0)) throw Error(Errc::non_positive, "hilbert_metric needs positive vectors");
    const double r = std::log(u[i]) - std::log(w[i]);
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  return hi - lo;
}

MarginalError marginal_error(const DenseMatrix& p, const Marginals& marginals) {
  if (marginals.mu.size() != p.rows() || marginals.nu.size() != p.cols())
    throw Error(Errc::dimension_mismatch, "marginal_error shapes");
  return {l1_residual(row_sums(p), marginals.mu), l1_residual(col_sums(p), marginals.nu)};
}

double dual_objective(const Vector& f, const Vector& g, const CostMatrix& cost, double epsilon,
                      const Marginals& marginals) {
  const DenseMatrix& c = cost.values();
  if (f.size() != c.rows() || g.size() != c.cols() || marginals.mu.size() != f.size() ||
      marginals.nu.size() != g.size())
    throw Error(Errc::dimension_mismatch, "dual_objective shapes");
  double lin = 0.0, ex = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) lin += marginals.mu[i] * f[i];
  for (std::size_t j = 0; j < g.size(); ++j) lin += marginals.nu[j] * g[j];
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      ex += marginals.mu[i] * marginals.nu[j] * std::exp((f[i] + g[j] - c(i, j)) / epsilon);
  return lin - epsilon * ex + epsilon;
}

double solver_dual_objective(const Vector& f, const Vector& g, const CostMatrix& cost, double epsilon,
                             const Marginals& marginals) {
  if (f.size() != marginals.mu.size() || g.size() != marginals.nu.size())
    throw Error(Errc::dimension_mismatch, "solver_dual_objective shapes");
  Vector fr(f.size()), gr(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) fr[i] = f[i] - epsilon * std::log(marginals.mu[i]);
  for (std::size_t j = 0; j < g.size(); ++j) gr[j] = g[j] - epsilon * std::log(marginals.nu[j]);
  return dual_objective(fr, gr, cost, epsilon, marginals);
}

DenseMatrix plan_from_potentials(const Vector& f, const Vector& g, const CostMatrix& cost, double epsilon) {
  const DenseMatrix& c = cost.values();
  if (f.size() != c.rows() || g.size() != c.cols()) throw Error(Errc::dimension_mismatch, "plan_from_potentials");
  DenseMatrix p(c.rows(), c.cols());
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) p(i, j) = std::exp((f[i] + g[j] - c(i, j)) / epsilon);
  return p;
}

}  // namespace gca
