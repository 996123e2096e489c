#include "gca/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "gca/error.hpp"
#include "gca/uot.hpp"

namespace gca {

namespace {

constexpr std::array<std::pair<LossKind, std::string_view>, 6> kLossNames = {{
    {LossKind::ince, "ince"},
    {LossKind::gca_ince, "gca-ince"},
    {LossKind::rince, "rince"},
    {LossKind::gca_rince, "gca-rince"},
    {LossKind::gca_uot, "gca-uot"},
    {LossKind::byol, "byol"},
}};

void require_pair(const EmbeddingBatch& a, const EmbeddingBatch& b, const char* what) {
  if (a.batch() != b.batch() || a.dim() != b.dim())
    throw Error(Errc::dimension_mismatch,
                std::string(what) + ": batches are " + std::to_string(a.batch()) + "x" + std::to_string(a.dim()) +
                    " and " + std::to_string(b.batch()) + "x" + std::to_string(b.dim()));
}

void require_finite_value(double value, const char* what) {
  if (!std::isfinite(value)) throw Error(Errc::non_finite_loss, std::string(what) + " produced a non-finite value");
}

const DenseMatrix& target_or_identity(const std::optional<TargetPlan>& target, std::size_t b, DenseMatrix& storage) {
  if (target) {
    if (target->size() != b)
      throw Error(Errc::dimension_mismatch, "target plan is " + std::to_string(target->size()) + "x" +
                                                std::to_string(target->size()) + ", batch is " + std::to_string(b));
    return target->values();
  }
  storage = identity_plan(b).values();
  return storage;
}

// C = 1 - Z1 Z2^T, so dL/dZ1 = -G Z2 and dL/dZ2 = -G^T Z1.
void attach_gradients(const DenseMatrix& g, const EmbeddingBatch& z1, const EmbeddingBatch& z2, LossResult& r) {
  r.unit_grad_z1 = matmul(g, z2.unit());
  r.unit_grad_z2 = matmul_tn(g, z1.unit());
  for (double& x : r.unit_grad_z1.data()) x = -x;
  for (double& x : r.unit_grad_z2.data()) x = -x;
  r.grad_z1 = normalize_rows_backward(z1, r.unit_grad_z1);
  r.grad_z2 = normalize_rows_backward(z2, r.unit_grad_z2);
}

struct RowSoftmax {
  DenseMatrix p;
  Vector lse;
};

RowSoftmax row_softmax(const DenseMatrix& s) {
  RowSoftmax out{DenseMatrix(s.rows(), s.cols()), Vector(s.rows())};
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto r = s.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double x : r) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    out.lse[i] = lse;
    auto pr = out.p.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) pr[j] = std::exp(r[j] - lse);
  }
  return out;
}

DenseMatrix similarities(const CostMatrix& c, double epsilon) {
  DenseMatrix s = c.values();
  for (double& x : s.data()) x = (1.0 - x) / epsilon;
  return s;
}

// Scaling snapshot of the first row projection u = 1/(K 1), v = 1.
ScalingState half_step_state(const Vector& lse, double epsilon) {
  ScalingState st;
  st.epsilon = epsilon;
  st.iterations = 1;
  st.half_steps = 1;
  const std::size_t b = lse.size();
  st.f.resize(b);
  st.u.resize(b);
  st.g.assign(b, 0.0);
  st.v.assign(b, 1.0);
  for (std::size_t i = 0; i < b; ++i) {
    st.f[i] = 1.0 - epsilon * lse[i];
    st.u[i] = std::exp(st.f[i] / epsilon);
  }
  return st;
}

// KL(Pt | P) with log P supplied through the potentials.
double kl_from_potentials(const DenseMatrix& target, const Vector& f, const Vector& g, const DenseMatrix& cost,
                          double epsilon, double plan_mass) {
  double s = 0.0;
  for (std::size_t i = 0; i < target.rows(); ++i)
    for (std::size_t j = 0; j < target.cols(); ++j) {
      const double t = target(i, j);
      if (t > 0.0) s += t * (std::log(t) - (f[i] + g[j] - cost(i, j)) / epsilon) - t;
    }
  return s + plan_mass;
}

// Solver quantities held constant when differentiating.
struct Frozen {
  Vector f;
  Vector g;
  Vector g_previous;
};

struct RinceTerm {
  double value = 0.0;
  DenseMatrix grad_cost;
};

// sum_i (1/q)(-(K_ii V_i)^q + lambda^q S_i^(q*fi)), S = K V, V = exp(g_prev/eps) frozen.
// fi = 1 is the balanced case, where S_i^q = u_i^-q.
RinceTerm rince_term(const GibbsKernel& k, const Vector& g_prev, const RinceParams& p, double fi, bool want_grad) {
  const std::size_t b = k.rows();
  const double eps = k.epsilon();
  const DenseMatrix& kv = k.values();
  Vector vprev(b);
  for (std::size_t j = 0; j < b; ++j) vprev[j] = std::exp(g_prev[j] / eps);
  const Vector s = matvec(kv, vprev);
  const double lq = std::pow(p.lambda, p.q);
  RinceTerm out;
  if (want_grad) out.grad_cost = DenseMatrix(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    const double a = kv(i, i) * vprev[i];
    const double aq = std::pow(a, p.q);
    const double sq = std::pow(s[i], p.q * fi);
    out.value += (-aq + lq * sq) / p.q;
    if (!want_grad) continue;
    const double coef = lq * fi * sq / s[i];
    auto gr = out.grad_cost.row(i);
    const auto kr = kv.row(i);
    for (std::size_t j = 0; j < b; ++j) gr[j] = -coef * kr[j] * vprev[j] / eps;
    gr[i] += aq / eps;
  }
  return out;
}

double frozen_value(const LossConfig& cfg, const EmbeddingBatch& z1, const EmbeddingBatch& z2, const Frozen& fz) {
  const std::size_t b = z1.batch();
  const double eps = cfg.epsilon;
  DenseMatrix id;
  switch (cfg.kind) {
    case LossKind::ince:
      return ince_loss(z1, z2, eps).value;
    case LossKind::rince:
      return rince_loss(z1, z2, eps, cfg.rince).value;
    case LossKind::byol:
      return byol_loss(z1, z2).value;
    case LossKind::gca_ince: {
      const CostMatrix c = cosine_cost(z1, z2);
      const DenseMatrix p = plan_from_potentials(fz.f, fz.g, c, eps);
      return kl_from_potentials(target_or_identity(cfg.target, b, id), fz.f, fz.g, c.values(), eps, total(p));
    }
    case LossKind::gca_rince: {
      const GibbsKernel k = gibbs_kernel(cosine_cost(z1, z2), eps);
      return rince_term(k, fz.g_previous, cfg.rince, 1.0, false).value;
    }
    case LossKind::gca_uot: {
      const GibbsKernel k = gibbs_kernel(cosine_cost(z1, z2), eps);
      const double fi1 = damped_exponent(cfg.lambda1, eps);
      const double r = rince_term(k, fz.g_previous, cfg.rince, fi1, false).value;
      const DenseMatrix p = plan_from_potentials(fz.f, fz.g, k.cost(), eps);
      const double kl =
          kl_from_potentials(target_or_identity(cfg.target, b, id), fz.f, fz.g, k.cost().values(), eps, total(p));
      return cfg.weight * r + (1.0 - cfg.weight) * kl;
    }
  }
  return 0.0;
}

LossResult gca_rince_impl(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                          const RinceParams& params, std::size_t iterations, bool want_grad, Frozen* frozen) {
  require_pair(z1, z2, "gca_rince_loss");
  params.validate();
  if (iterations == 0) throw Error(Errc::invalid_argument, "gca_rince_loss needs T >= 1");
  const std::size_t b = z1.batch();
  const GibbsKernel k = gibbs_kernel(cosine_cost(z1, z2), epsilon);
  SolverOptions so;
  so.max_iterations = iterations;
  so.stop_after_row_update = true;
  SinkhornResult sr = sinkhorn(k, Marginals::uniform(b), so);

  LossResult r;
  const double lq = std::pow(params.lambda, params.q);
  for (std::size_t i = 0; i < b; ++i) {
    const double ratio = sr.plan.P(i, i) / sr.state.u[i];
    r.value += (-std::pow(ratio, params.q) + lq * std::pow(sr.state.u[i], -params.q)) / params.q;
  }
  require_finite_value(r.value, "gca_rince_loss");
  if (want_grad) attach_gradients(rince_term(k, sr.g_previous, params, 1.0, true).grad_cost, z1, z2, r);
  if (frozen) *frozen = {sr.state.f, sr.state.g, sr.g_previous};
  r.plan = std::move(sr.plan.P);
  r.scaling = std::move(sr.state);
  return r;
}

LossResult gca_ince_impl(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                         const GcaInceOptions& opts, Frozen* frozen) {
  require_pair(z1, z2, "gca_ince_loss");
  if (opts.iterations == 0) throw Error(Errc::invalid_argument, "gca_ince_loss needs T >= 1");
  const std::size_t b = z1.batch();
  DenseMatrix id;
  const DenseMatrix& target = target_or_identity(opts.target, b, id);
  const GibbsKernel k = gibbs_kernel(cosine_cost(z1, z2), epsilon);
  SolverOptions so;
  so.max_iterations = opts.half_step ? 1 : opts.iterations;
  so.stop_after_row_update = opts.half_step;
  so.absorption_threshold = opts.absorption_threshold;
  SinkhornResult sr = sinkhorn(k, Marginals::uniform(b), so);
  const DenseMatrix& p = sr.plan.P;

  LossResult r;
  r.value = kl_from_potentials(target, sr.state.f, sr.state.g, k.cost().values(), epsilon, total(p));
  require_finite_value(r.value, "gca_ince_loss");
  DenseMatrix g(b, b);
  for (std::size_t n = 0; n < g.size(); ++n) g.data()[n] = (target.data()[n] - p.data()[n]) / epsilon;
  attach_gradients(g, z1, z2, r);
  if (frozen) *frozen = {sr.state.f, sr.state.g, sr.g_previous};
  r.plan = std::move(sr.plan.P);
  r.scaling = std::move(sr.state);
  return r;
}

LossResult gca_uot_impl(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                        const GcaUotOptions& opts, Frozen* frozen) {
  require_pair(z1, z2, "gca_uot_loss");
  opts.rince.validate();
  if (!(opts.weight >= 0.0 && opts.weight <= 1.0)) throw Error(Errc::invalid_argument, "weight must lie in [0,1]");
  const std::size_t b = z1.batch();
  DenseMatrix id;
  const DenseMatrix& target = target_or_identity(opts.target, b, id);
  const GibbsKernel k = gibbs_kernel(cosine_cost(z1, z2), epsilon);
  UotOptions uo;
  uo.lambda1 = opts.lambda1;
  uo.lambda2 = opts.lambda2;
  uo.max_iterations = opts.iterations;
  uo.absorption_threshold = opts.absorption_threshold;
  UotResult ur = unbalanced_sinkhorn(k, Marginals::uniform(b), uo);
  const DenseMatrix& p = ur.plan.P;
  const double fi1 = damped_exponent(opts.lambda1, epsilon);

  const RinceTerm rt = rince_term(k, ur.g_previous, opts.rince, fi1, true);
  const double kl = kl_from_potentials(target, ur.state.f, ur.state.g, k.cost().values(), epsilon, total(p));
  const double w = opts.weight;

  LossResult r;
  r.value = w * rt.value + (1.0 - w) * kl;
  require_finite_value(r.value, "gca_uot_loss");
  DenseMatrix g(b, b);
  for (std::size_t n = 0; n < g.size(); ++n)
    g.data()[n] = w * rt.grad_cost.data()[n] + (1.0 - w) * (target.data()[n] - p.data()[n]) / epsilon;
  attach_gradients(g, z1, z2, r);
  if (frozen) *frozen = {ur.state.f, ur.state.g, ur.g_previous};
  r.plan = std::move(ur.plan.P);
  r.scaling = std::move(ur.state);
  return r;
}

LossResult evaluate_impl(const LossConfig& cfg, const EmbeddingBatch& z1, const EmbeddingBatch& z2, Frozen* fz) {
  cfg.validate();
  switch (cfg.kind) {
    case LossKind::ince:
      return ince_loss(z1, z2, cfg.epsilon);
    case LossKind::rince:
      return rince_loss(z1, z2, cfg.epsilon, cfg.rince);
    case LossKind::byol:
      return byol_loss(z1, z2);
    case LossKind::gca_ince:
      return gca_ince_impl(z1, z2, cfg.epsilon,
                           {cfg.iterations, cfg.half_step, cfg.target, cfg.absorption_threshold}, fz);
    case LossKind::gca_rince:
      return gca_rince_impl(z1, z2, cfg.epsilon, cfg.rince, cfg.iterations, true, fz);
    case LossKind::gca_uot:
      return gca_uot_impl(z1, z2, cfg.epsilon,
                          {cfg.lambda1, cfg.lambda2, cfg.rince, cfg.weight, cfg.iterations, cfg.target,
                           cfg.absorption_threshold},
                          fz);
  }
  throw Error(Errc::invalid_argument, "unknown loss");
}

}  // namespace

std::string_view loss_name(LossKind kind) noexcept {
  for (const auto& [k, name] : kLossNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kLossNames)
    if (n == name) return k;
  return std::nullopt;
}

void RinceParams::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw Error(Errc::invalid_argument, "RINCE q must lie in (0,1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(Errc::invalid_argument, "RINCE lambda must be >= 0");
}

void LossConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(Errc::invalid_argument, "epsilon must be positive");
  if (iterations == 0) throw Error(Errc::invalid_argument, "iterations must be positive");
  rince.validate();
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw Error(Errc::invalid_argument, "lambda1/lambda2 must be >= 0");
  if (!(weight >= 0.0 && weight <= 1.0)) throw Error(Errc::invalid_argument, "weight must lie in [0,1]");
}

double kl_plan_divergence(const DenseMatrix& target, const DenseMatrix& p) {
  require_same_shape(target, p, "kl_plan_divergence");
  double s = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double t = target.data()[n], x = p.data()[n];
    if (t > 0.0) {
      if (!(x > 0.0))
        throw Error(Errc::support_violation, "plan vanishes at entry (" + std::to_string(n / p.cols()) + "," +
                                                 std::to_string(n % p.cols()) + ") where the target is positive");
      s += t * std::log(t / x);
    }
    s += x - t;
  }
  return s;
}

double kl_plan_divergence(const TargetPlan& target, const DenseMatrix& p) {
  return kl_plan_divergence(target.values(), p);
}

LossResult ince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon) {
  require_pair(z1, z2, "ince_loss");
  if (!(epsilon > 0.0)) throw Error(Errc::invalid_argument, "epsilon must be positive");
  const std::size_t b = z1.batch();
  const DenseMatrix s = similarities(cosine_cost(z1, z2), epsilon);
  RowSoftmax sm = row_softmax(s);
  LossResult r;
  for (std::size_t i = 0; i < b; ++i) r.value += sm.lse[i] - s(i, i);
  require_finite_value(r.value, "ince_loss");
  DenseMatrix g(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) g(i, j) = ((i == j ? 1.0 : 0.0) - sm.p(i, j)) / epsilon;
  attach_gradients(g, z1, z2, r);
  r.plan = std::move(sm.p);
  r.scaling = half_step_state(sm.lse, epsilon);
  return r;
}

LossResult gca_ince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                         const GcaInceOptions& opts) {
  return gca_ince_impl(z1, z2, epsilon, opts, nullptr);
}

LossResult rince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon, const RinceParams& params) {
  require_pair(z1, z2, "rince_loss");
  params.validate();
  if (!(epsilon > 0.0)) throw Error(Errc::invalid_argument, "epsilon must be positive");
  const std::size_t b = z1.batch();
  const DenseMatrix s = similarities(cosine_cost(z1, z2), epsilon);
  const double q = params.q;
  const double lq = std::pow(params.lambda, q);
  LossResult r;
  DenseMatrix g(b, b);
  Vector lse(b);
  DenseMatrix plan(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto si = s.row(i);
    double total_e = 0.0;
    for (double x : si) total_e += std::exp(x);
    const double pos = std::exp(q * si[i]);
    r.value += (-pos + lq * std::pow(total_e, q)) / q;
    const double coef = lq * std::pow(total_e, q - 1.0);
    auto gi = g.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      const double e = std::exp(si[j]);
      gi[j] = -coef * e / epsilon;
      plan(i, j) = e / total_e;
    }
    gi[i] += pos / epsilon;
    lse[i] = std::log(total_e);
  }
  require_finite_value(r.value, "rince_loss");
  attach_gradients(g, z1, z2, r);
  r.plan = std::move(plan);
  r.scaling = half_step_state(lse, epsilon);
  return r;
}

double rince_proximal_form(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                           const RinceParams& params) {
  return gca_rince_impl(z1, z2, epsilon, params, 1, false, nullptr).value;
}

LossResult gca_rince_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                          const RinceParams& params, std::size_t iterations) {
  return gca_rince_impl(z1, z2, epsilon, params, iterations, true, nullptr);
}

LossResult gca_uot_loss(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double epsilon,
                        const GcaUotOptions& opts) {
  return gca_uot_impl(z1, z2, epsilon, opts, nullptr);
}

LossResult byol_loss(const EmbeddingBatch& q, const EmbeddingBatch& z2) {
  require_pair(q, z2, "byol_loss");
  const std::size_t b = q.batch(), d = q.dim();
  LossResult r;
  r.unit_grad_z1 = DenseMatrix(b, d);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = q.unit()(i, k) - z2.unit()(i, k);
      r.value += diff * diff;
      r.unit_grad_z1(i, k) = 2.0 * diff;
    }
  r.unit_grad_z2 = DenseMatrix(b, d);
  r.grad_z1 = normalize_rows_backward(q, r.unit_grad_z1);
  r.grad_z2 = DenseMatrix(b, d);
  r.plan = byol_kernel(q, z2).values();
  return r;
}

LossResult evaluate_loss(const LossConfig& config, const EmbeddingBatch& z1, const EmbeddingBatch& z2) {
  return evaluate_impl(config, z1, z2, nullptr);
}

double loss_grad_check(const LossConfig& config, const DenseMatrix& z1_raw, const DenseMatrix& z2_raw, double step) {
  const EmbeddingBatch z1 = normalize_rows(z1_raw);
  const EmbeddingBatch z2 = normalize_rows(z2_raw);
  Frozen fz;
  const LossResult base = evaluate_impl(config, z1, z2, &fz);

  double num_max = 0.0, diff_max = 0.0;
  auto probe = [&](const DenseMatrix& raw, const DenseMatrix& analytic, bool first) {
    DenseMatrix work = raw;
    for (std::size_t n = 0; n < work.size(); ++n) {
      const double x0 = work.data()[n];
      work.data()[n] = x0 + step;
      const EmbeddingBatch zp = normalize_rows(work);
      const double lp = first ? frozen_value(config, zp, z2, fz) : frozen_value(config, z1, zp, fz);
      work.data()[n] = x0 - step;
      const EmbeddingBatch zm = normalize_rows(work);
      const double lm = first ? frozen_value(config, zm, z2, fz) : frozen_value(config, z1, zm, fz);
      work.data()[n] = x0;
      const double numeric = (lp - lm) / (2.0 * step);
      num_max = std::max(num_max, std::abs(numeric));
      diff_max = std::max(diff_max, std::abs(numeric - analytic.data()[n]));
    }
  };
  probe(z1_raw, base.grad_z1, true);
  // The BYOL target branch is a stop-gradient, so only the online side is checked.
  if (config.kind != LossKind::byol) probe(z2_raw, base.grad_z2, false);
  return num_max > 0.0 ? diff_max / num_max : diff_max;
}

}  // namespace gca
