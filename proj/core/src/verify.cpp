#include "gca/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "gca/error.hpp"
#include "gca/losses.hpp"
#include "gca/metrics.hpp"
#include "gca/solver.hpp"
#include "gca/uot.hpp"

namespace gca {

BatchPair random_batch_pair(std::mt19937_64& rng, std::size_t batch, std::size_t dim, double sigma) {
  std::normal_distribution<double> n01(0.0, 1.0);
  BatchPair p;
  p.z1_raw = DenseMatrix(batch, dim);
  for (double& x : p.z1_raw.data()) x = n01(rng);
  p.z2_raw = p.z1_raw;
  for (double& x : p.z2_raw.data()) x += sigma * n01(rng);
  p.z1 = normalize_rows(p.z1_raw);
  p.z2 = normalize_rows(p.z2_raw);
  return p;
}

RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_batch) {
  static constexpr double kEps[] = {0.1, 0.5, 1.0};
  static constexpr double kSigma[] = {0.1, 0.5, 1.0};
  std::uniform_int_distribution<std::size_t> bdist(4, std::max<std::size_t>(4, max_batch));
  std::uniform_int_distribution<std::size_t> ddist(4, 32);
  std::uniform_int_distribution<int> pick(0, 2);
  RandomInstance inst;
  const std::size_t b = bdist(rng), d = ddist(rng);
  inst.epsilon = kEps[pick(rng)];
  inst.sigma = kSigma[pick(rng)];
  inst.pair = random_batch_pair(rng, b, d, inst.sigma);
  return inst;
}

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GCA_THREADS")) {
      char* end = nullptr;
      const long cap = std::strtol(env, &end, 10);
      if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    }
  }
  return std::max<std::size_t>(1, n);
}

namespace {

// Outcome of one instance: a violation measure and whether it exceeds the tolerance.
struct Check {
  double violation = 0.0;
  bool ok = true;
  std::string detail;
};

using InstanceFn = std::function<Check(std::mt19937_64&, double scale)>;

struct Property {
  std::string_view name;
  double tolerance;
  InstanceFn fn;
};

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

std::string describe(const RandomInstance& in) {
  std::ostringstream ss;
  ss << "B=" << in.pair.z1.batch() << " d=" << in.pair.z1.dim() << " eps=" << in.epsilon << " sigma=" << in.sigma;
  return ss.str();
}

Check half_step_ince(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  const double a = ince_loss(in.pair.z1, in.pair.z2, in.epsilon).value;
  GcaInceOptions o;
  o.half_step = true;
  const double b = gca_ince_loss(in.pair.z1, in.pair.z2, in.epsilon, o).value;
  const double v = std::abs(a - b);
  return {v, v <= 1e-10 * scale, describe(in)};
}

Check proximal_rince(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  std::uniform_int_distribution<int> pick(0, 1);
  RinceParams p;
  p.q = pick(rng) ? 1.0 : 0.5;
  p.lambda = pick(rng) ? 0.5 : 0.01;
  const double r = rince_loss(in.pair.z1, in.pair.z2, in.epsilon, p).value;
  const double prox = rince_proximal_form(in.pair.z1, in.pair.z2, in.epsilon, p);
  const double v = rel(std::exp(p.q / in.epsilon) * prox, r);
  return {v, v <= 1e-9 * scale, describe(in) + " q=" + std::to_string(p.q) + " lambda=" + std::to_string(p.lambda)};
}

SinkhornResult recorded_solve(const RandomInstance& in, std::size_t iterations, GibbsKernel& k) {
  k = gibbs_kernel(cosine_cost(in.pair.z1, in.pair.z2), in.epsilon);
  SolverOptions so;
  so.max_iterations = iterations;
  so.record_trajectory = true;
  return sinkhorn(k, Marginals::uniform(in.pair.z1.batch()), so);
}

// KL(I | P^(2t)) is non-increasing for t = 1..10 and agrees with the dual identity.
Check kl_monotone(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  GibbsKernel k;
  const SinkhornResult sr = recorded_solve(in, 10, k);
  const std::size_t b = in.pair.z1.batch();
  const DenseMatrix id = DenseMatrix::identity(b);
  double prev = INFINITY, worst_rise = 0.0, worst_gap = 0.0;
  bool ok = true;
  for (const auto& pt : sr.trajectory) {
    if (pt.half_step == 0 || pt.half_step % 2 != 0) continue;
    const double direct = kl_plan_divergence(id, plan_from_potentials(pt.f, pt.g, k.cost(), in.epsilon));
    const double dual = kl_via_duals(k.cost(), pt.f, pt.g, in.epsilon);
    const double gap = std::abs(direct - dual);
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-9 * scale) ok = false;
    if (std::isfinite(prev)) {
      const double rise = direct - prev;
      worst_rise = std::max(worst_rise, rise);
      if (rise > 1e-12 * std::max(1.0, std::abs(prev)) * scale) ok = false;
    }
    prev = direct;
  }
  return {std::max(worst_rise, worst_gap), ok, describe(in)};
}

// q = 1: the T = 5 GCA-RINCE loss sits below the one-step proximal form.
Check rince_descent(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  std::uniform_int_distribution<int> pick(0, 1);
  RinceParams p;
  p.q = 1.0;
  p.lambda = pick(rng) ? 0.5 : 0.01;
  const double t5 = gca_rince_loss(in.pair.z1, in.pair.z2, in.epsilon, p, 5).value;
  const double t1 = rince_proximal_form(in.pair.z1, in.pair.z2, in.epsilon, p);
  const double v = t5 - t1;
  return {std::max(v, 0.0), v <= 1e-12 * scale,
          describe(in) + " lambda=" + std::to_string(p.lambda) + " excess=" + std::to_string(v)};
}

// KL from potentials at every recorded half-step: KL(I|P) = (sum C_ii - sum(f+g))/eps.
Check dual_kl_identity(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  GibbsKernel k;
  const SinkhornResult sr = recorded_solve(in, 10, k);
  const DenseMatrix id = DenseMatrix::identity(in.pair.z1.batch());
  double worst = 0.0;
  for (const auto& pt : sr.trajectory) {
    if (pt.half_step == 0) continue;
    const double direct = kl_plan_divergence(id, plan_from_potentials(pt.f, pt.g, k.cost(), in.epsilon));
    worst = std::max(worst, std::abs(direct - kl_via_duals(k.cost(), pt.f, pt.g, in.epsilon)));
  }
  return {worst, worst <= 1e-9 * scale, describe(in)};
}

Check dual_monotone(std::mt19937_64& rng, double scale) {
  const RandomInstance in = random_instance(rng);
  GibbsKernel k;
  const SinkhornResult sr = recorded_solve(in, 10, k);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t t = 1; t < sr.trajectory.size(); ++t) {
    const double drop = sr.trajectory[t - 1].dual - sr.trajectory[t].dual;
    worst = std::max(worst, drop);
    if (drop > 1e-12 * std::max(1.0, std::abs(sr.trajectory[t - 1].dual)) * scale) ok = false;
  }
  auto fg = [](const TrajectoryPoint& p) { return sum(p.f) + sum(p.g); };
  const double gain = fg(sr.trajectory.back()) - fg(sr.trajectory[1]);
  if (gain < -1e-12 * scale) ok = false;
  worst = std::max(worst, -gain);
  return {std::max(worst, 0.0), ok, describe(in)};
}

// Large relaxation weights against the balanced solver at matched iteration counts.
Check uot_balanced_limit(std::mt19937_64& rng, double scale) {
  RandomInstance in = random_instance(rng);
  in.epsilon = 0.5;
  const GibbsKernel k = gibbs_kernel(cosine_cost(in.pair.z1, in.pair.z2), in.epsilon);
  const Marginals m = Marginals::uniform(in.pair.z1.batch());
  double worst = 0.0;
  for (std::size_t t : {std::size_t{5}, std::size_t{100}}) {
    SolverOptions so;
    so.max_iterations = t;
    UotOptions uo;
    uo.lambda1 = uo.lambda2 = 1e4;
    uo.max_iterations = t;
    uo.column_normalize = false;
    worst = std::max(worst, l1_diff(unbalanced_sinkhorn(k, m, uo).plan.P, sinkhorn(k, m, so).plan.P));
  }
  return {worst, worst <= 1e-3 * scale, describe(in)};
}

const std::vector<Property>& registry() {
  static const std::vector<Property> props = {
      {"half_step_ince", 1e-10, half_step_ince},
      {"proximal_rince", 1e-9, proximal_rince},
      {"kl_monotone", 1e-9, kl_monotone},
      {"rince_descent", 1e-12, rince_descent},
      {"dual_kl_identity", 1e-9, dual_kl_identity},
      {"dual_monotone", 1e-12, dual_monotone},
      {"uot_balanced_limit", 1e-3, uot_balanced_limit},
  };
  return props;
}

std::uint64_t instance_seed(std::uint64_t seed, std::string_view name, std::size_t index) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

std::vector<std::string_view> property_names() {
  std::vector<std::string_view> names;
  for (const auto& p : registry()) names.push_back(p.name);
  return names;
}

PropertyResult run_property(std::string_view name, const VerifyOptions& options) {
  const auto& props = registry();
  const auto it = std::find_if(props.begin(), props.end(), [&](const Property& p) { return p.name == name; });
  if (it == props.end()) throw Error(Errc::invalid_argument, "unknown property '" + std::string(name) + "'");
  if (!(options.tolerance_scale >= 0.0)) throw Error(Errc::invalid_argument, "tolerance scale must be >= 0");

  const std::size_t n = options.instances;
  std::vector<Check> checks(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      std::mt19937_64 rng(instance_seed(options.seed, name, i));
      try {
        checks[i] = it->fn(rng, options.tolerance_scale);
      } catch (const std::exception& e) {
        checks[i] = {INFINITY, false, e.what()};
      }
    }
  };
  const std::size_t threads = std::min(resolve_threads(options.threads), std::max<std::size_t>(1, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  PropertyResult r;
  r.name = std::string(name);
  r.instances = n;
  r.tolerance = it->tolerance * options.tolerance_scale;
  for (std::size_t i = 0; i < n; ++i) {
    r.worst = std::max(r.worst, checks[i].violation);
    if (!checks[i].ok) {
      if (r.failures == 0) r.first_failure = "instance " + std::to_string(i) + ": " + checks[i].detail;
      ++r.failures;
    }
  }
  r.passed = r.failures == 0;
  return r;
}

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  std::vector<PropertyResult> out;
  if (options.properties.empty()) {
    for (auto name : property_names()) out.push_back(run_property(name, options));
  } else {
    for (const auto& name : options.properties) out.push_back(run_property(name, options));
  }
  return out;
}

}  // namespace gca
