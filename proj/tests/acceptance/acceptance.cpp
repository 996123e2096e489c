// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gca/error.hpp"
#include "gca/losses.hpp"
#include "gca/metrics.hpp"
#include "gca/solver.hpp"
#include "gca/train.hpp"
#include "gca/uot.hpp"
#include "gca/verify.hpp"

using namespace gca;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

int g_failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.passed) ++g_failures;
  std::printf("%s C%-2d %-34s %s (%.1fs)\n", o.passed ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome property(const char* name, std::size_t n) {
  VerifyOptions o;
  o.instances = n;
  o.seed = 0;
  const PropertyResult r = run_property(name, o);
  std::string d = std::to_string(r.instances - r.failures) + "/" + std::to_string(r.instances) +
                  fmt(" worst %.3g tol %.3g", r.worst, r.tolerance);
  if (!r.passed) d += "; " + r.first_failure;
  return {r.passed, d};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

// Coefficient of determination of the least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double r = pearson(x, y);
  return r * r;
}

// Hilbert distance between exp(a/eps) and exp(b/eps), computed in the log domain.
double hilbert_log(const Vector& a, const Vector& b, double eps) {
  double hi = -INFINITY, lo = INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / eps;
    hi = std::max(hi, d);
    lo = std::min(lo, d);
  }
  return hi - lo;
}

Outcome solver_rate() {
  std::mt19937_64 rng(6);
  double worst_res = 0.0;
  std::vector<double> r2;
  const int n = 20;
  for (int rep = 0; rep < n; ++rep) {
    const RandomInstance inst = random_instance(rng);
    const GibbsKernel k = gibbs_kernel(cosine_cost(inst.pair.z1, inst.pair.z2), inst.epsilon);
    const Marginals m = Marginals::uniform(inst.pair.z1.batch());
    SolverOptions o;
    o.mode = SolveMode::to_tolerance;
    o.tolerance = 1e-10;
    o.max_iterations = 1000000;
    const SinkhornResult r = sinkhorn(k, m, o);
    worst_res = std::max({worst_res, r.plan.row_residual, r.plan.col_residual});

    o.tolerance = 1e-14;
    const SinkhornResult ref = sinkhorn(k, m, o);
    o.mode = SolveMode::fixed_iterations;
    o.max_iterations = ref.state.iterations;
    o.record_trajectory = true;
    const SinkhornResult tr = sinkhorn(k, m, o);
    std::vector<double> t, logd;
    for (const auto& pt : tr.trajectory) {
      if (pt.half_step % 2 != 1) continue;
      const double d = hilbert_log(pt.f, ref.state.f, inst.epsilon);
      if (d <= 1e-11) break;
      t.push_back(static_cast<double>(pt.half_step));
      logd.push_back(std::log(d));
    }
    if (t.size() >= 3) r2.push_back(r_squared(t, logd));
  }
  // Every kernel has to show a straight log-distance line.
  const double worst_r2 = *std::min_element(r2.begin(), r2.end());
  const auto good = std::count_if(r2.begin(), r2.end(), [](double v) { return v >= 0.99; });
  return {worst_res <= 1e-10 && worst_r2 >= 0.99,
          fmt("max residual %.2g, R^2 >= 0.99 on %g/%g kernels, min %.4f", worst_res, static_cast<double>(good),
              static_cast<double>(r2.size()), worst_r2) +
              fmt(" median %.4f", median(r2))};
}

Outcome uot_limits() {
  std::mt19937_64 rng(7);
  double worst_big = 0.0, worst_zero = 0.0;
  int monotone = 0;
  const int n = 20;
  for (int rep = 0; rep < n; ++rep) {
    const RandomInstance inst = random_instance(rng);
    const GibbsKernel k = gibbs_kernel(cosine_cost(inst.pair.z1, inst.pair.z2), 0.5);
    const Marginals m = Marginals::uniform(inst.pair.z1.batch());
    bool mono = true;
    for (std::size_t t : {std::size_t{5}, std::size_t{100}}) {
      SolverOptions so;
      so.max_iterations = t;
      const DenseMatrix balanced = sinkhorn(k, m, so).plan.P;
      double prev = INFINITY;
      for (double lam : {1.0, 10.0, 100.0, 1e4}) {
        UotOptions uo;
        uo.lambda1 = uo.lambda2 = lam;
        uo.max_iterations = t;
        uo.column_normalize = false;
        const double gap = l1_diff(unbalanced_sinkhorn(k, m, uo).plan.P, balanced);
        mono = mono && gap <= prev;
        prev = gap;
      }
      worst_big = std::max(worst_big, prev);
    }
    if (mono) ++monotone;

    UotOptions zero;
    zero.lambda1 = zero.lambda2 = 0.0;
    const DenseMatrix pz = unbalanced_sinkhorn(k, m, zero).plan.P;
    worst_zero = std::max(worst_zero, max_abs_diff(pz, project_cols(k.values(), m.nu)));
  }
  return {worst_big <= 1e-3 && worst_zero <= 1e-12 && monotone == n,
          fmt("lambda=1e4 gap %.2g, lambda=0 err %.2g, monotone %g/%g", worst_big, worst_zero, monotone, n)};
}

Outcome gradients() {
  std::mt19937_64 rng(8);
  struct Case {
    LossKind kind;
    double tol;
    double worst = 0.0;
  };
  std::vector<Case> cases{{LossKind::ince, 1e-5},
                          {LossKind::gca_ince, 1e-5},
                          {LossKind::gca_rince, 1e-5},
                          {LossKind::byol, 1e-5},
                          {LossKind::gca_uot, 1e-4}};
  bool ok = true;
  for (Case& c : cases) {
    for (int rep = 0; rep < 20; ++rep) {
      const RandomInstance inst = random_instance(rng, 16);
      LossConfig lc;
      lc.kind = c.kind;
      lc.epsilon = inst.epsilon;
      c.worst = std::max(c.worst, loss_grad_check(lc, inst.pair.z1_raw, inst.pair.z2_raw));
    }
    ok = ok && c.worst <= c.tol;
  }

  // Encoder backward against central differences of a fixed linear read-out.
  const EncoderShape shape{6, 10, 8, 5, Activation::relu};
  MlpEncoder enc(shape, 11);
  std::normal_distribution<double> n01;
  DenseMatrix x(8, 6), w(8, 5);
  for (double& v : x.data()) v = n01(rng);
  for (double& v : w.data()) v = n01(rng);
  auto objective = [&](const MlpEncoder& e) {
    const EncoderCache c = encoder_forward(e, x);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w.data()[i] * c.embeddings.unit().data()[i];
    return s;
  };
  enc.zero_grad();
  encoder_backward(enc, encoder_forward(enc, x), w);
  const Vector analytic = enc.gradients();
  const Vector base = enc.parameters();
  double diff = 0.0, scale = 0.0;
  MlpEncoder probe = enc;
  for (std::size_t k = 0; k < base.size(); ++k) {
    Vector p = base;
    p[k] += 1e-6;
    probe.set_parameters(p);
    const double up = objective(probe);
    p[k] -= 2e-6;
    probe.set_parameters(p);
    const double num = (up - objective(probe)) / 2e-6;
    diff = std::max(diff, std::abs(num - analytic[k]));
    scale = std::max(scale, std::abs(num));
  }
  const double enc_err = diff / scale;
  ok = ok && enc_err <= 1e-5;

  std::string d;
  for (const Case& c : cases) d += std::string(loss_name(c.kind)) + fmt(" %.1e, ", c.worst);
  d += fmt("encoder %.1e", enc_err);
  return {ok, d};
}

Outcome training() {
  BlobConfig bc;
  bc.classes = 4;
  bc.domains = 1;
  bc.dim = 16;
  bc.per_cell = 50;
  const SyntheticDataset data = gen_blobs(bc);
  bool ok = true;
  std::string d;
  for (LossKind kind : {LossKind::gca_ince, LossKind::gca_rince, LossKind::gca_uot}) {
    TrainConfig tc;
    tc.loss.kind = kind;
    tc.loss.epsilon = 0.5;
    tc.batch = 64;
    tc.epochs = 200;
    const TrainResult r = train_encoder(data, tc, default_augment());
    const double acc = linear_probe(encoder_representation(r.encoder, data.points), data.class_labels, 0.5, 0);
    const EpochMetrics& a = r.history.front();
    const EpochMetrics& b = r.history.back();
    const bool pass = acc >= 0.95 && b.alignment < a.alignment && b.uniformity < a.uniformity;
    ok = ok && pass;
    d += std::string(loss_name(kind)) + fmt(" acc %.3f align %.3f->%.3f unif %.3f", acc, a.alignment, b.alignment,
                                            a.uniformity) +
         fmt("->%.3f; ", b.uniformity);
  }
  return {ok, d};
}

Outcome domain_sweep() {
  const std::vector<double> alphas{0.0, 0.25, 0.5, 1.0};
  std::vector<std::vector<double>> cls(alphas.size()), dom(alphas.size());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DomainExperimentConfig c;
    c.data.classes = 4;
    c.data.domains = 2;
    c.data.domain_offset_scale = 0.7;
    c.data.seed = seed;
    c.train.seed = seed;
    const auto rows = domain_alignment_experiment(alphas, 0.0, c);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      cls[a].push_back(rows[a].class_accuracy);
      dom[a].push_back(rows[a].domain_accuracy);
    }
  }
  std::vector<double> mc, md;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    mc.push_back(median(cls[a]));
    md.push_back(median(dom[a]));
  }
  const double rho = pearson(ranks(alphas), ranks(md));
  const bool nondecreasing = std::is_sorted(md.begin(), md.end());
  const double drop = mc.front() - mc.back();
  std::string d = "domain";
  for (double v : md) d += fmt(" %.3f", v);
  d += " class";
  for (double v : mc) d += fmt(" %.3f", v);
  d += fmt(", rho %.2f", rho);
  return {nondecreasing && rho > 0.0 && drop <= 0.02, d};
}

Outcome throughput() {
  std::mt19937_64 rng(11);
  std::vector<double> ince, uot;
  using clock = std::chrono::steady_clock;
  for (int rep = 0; rep < 50; ++rep) {
    const BatchPair p = random_batch_pair(rng, 256, 32, 0.5);
    // Alternate the order so neither loss always runs on a warm cache.
    for (int k = 0; k < 2; ++k) {
      const bool uot_turn = (k == 0) == (rep % 2 == 0);
      const auto t0 = clock::now();
      const double v = uot_turn ? gca_uot_loss(p.z1, p.z2, 0.5).value : gca_ince_loss(p.z1, p.z2, 0.5).value;
      const double dt = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      if (!std::isfinite(v)) throw Error(Errc::non_finite_loss, "throughput batch");
      (uot_turn ? uot : ince).push_back(dt);
    }
  }
  const double mi = median(ince), mu = median(uot);
  return {mu <= mi, fmt("median gca-uot %.3f ms, gca-ince %.3f ms (ratio %.3f)", mu, mi, mu / mi)};
}

}  // namespace

int main() {
  report(1, "half-step equivalence (INCE)", [] { return property("half_step_ince", 200); });
  report(2, "proximal equivalence (RINCE)", [] { return property("proximal_rince", 200); });
  report(3, "KL monotone in iterations", [] { return property("kl_monotone", 100); });
  report(4, "GCA-RINCE below proximal RINCE", [] { return property("rince_descent", 100); });
  report(5, "dual objective non-decreasing", [] { return property("dual_monotone", 100); });
  report(6, "solver feasibility and rate", solver_rate);
  report(7, "UOT limits", uot_limits);
  report(8, "gradient correctness", gradients);
  report(9, "desk-scale training", training);
  report(10, "domain-plan sweep", domain_sweep);
  report(11, "UOT throughput ordering", throughput);
  std::printf("%d of 11 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
