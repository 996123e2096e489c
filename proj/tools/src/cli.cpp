#include "gca/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gca/error.hpp"
#include "gca/losses.hpp"
#include "gca/matio.hpp"
#include "gca/metrics.hpp"
#include "gca/plans.hpp"
#include "gca/solver.hpp"
#include "gca/train.hpp"
#include "gca/uot.hpp"
#include "gca/verify.hpp"

namespace gca::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    T value{};
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc{} || end != item.data() + item.size() || item.empty())
      throw CLI::ValidationError(flag, "cannot parse list item '" + std::string(item) + "'");
    out.push_back(value);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw CLI::ValidationError(flag, "empty list");
  return out;
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error(Errc::io, "write failed for " + path.string());
}

// Either a cost matrix or a kernel matrix, as chosen on the command line.
struct KernelInput {
  std::string cost_path;
  std::string kernel_path;
  double epsilon = 0.5;
  std::string mu_path;
  std::string nu_path;
  std::string out_path;
  std::string diagnostics_path;

  void add_to(CLI::App& app) {
    auto* c = app.add_option("--cost", cost_path, "cost matrix file");
    auto* k = app.add_option("--kernel", kernel_path, "Gibbs kernel file (entries > 0)");
    c->excludes(k);
    app.add_option("--epsilon", epsilon, "entropic regularization")->check(CLI::PositiveNumber);
    app.add_option("--mu", mu_path, "row marginal file (default all ones)");
    app.add_option("--nu", nu_path, "column marginal file (default all ones)");
    app.add_option("-o,--out", out_path, "plan output (default stdout)");
    app.add_option("--diagnostics", diagnostics_path, "diagnostics JSON output");
  }

  GibbsKernel kernel() const {
    if (cost_path.empty() == kernel_path.empty()) throw CLI::RequiredError("exactly one of --cost or --kernel");
    if (!cost_path.empty()) return gibbs_kernel(CostMatrix(read_matrix(cost_path)), epsilon);
    return GibbsKernel::from_values(read_matrix(kernel_path), epsilon);
  }

  Marginals marginals(const GibbsKernel& k) const {
    Marginals m = Marginals::uniform(k.rows(), k.cols());
    if (!mu_path.empty()) m.mu = read_vector(mu_path);
    if (!nu_path.empty()) m.nu = read_vector(nu_path);
    m.validate(k.rows(), k.cols());
    return m;
  }

  void emit_plan(const DenseMatrix& p, std::ostream& out) const {
    if (out_path.empty())
      out << format_matrix_csv(p);
    else
      write_matrix(p, out_path);
  }
};

struct LossFlags {
  std::string loss = "gca-ince";
  double epsilon = 0.5;
  std::size_t iterations = 5;
  bool half_step = false;
  double q = RinceParams{}.q;
  double lambda = RinceParams{}.lambda;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double weight = 0.5;

  void add_to(CLI::App& app) {
    app.add_option("--loss", loss, "ince, gca-ince, rince, gca-rince, gca-uot or byol")
        ->check(CLI::IsMember({"ince", "gca-ince", "rince", "gca-rince", "gca-uot", "byol"}));
    app.add_option("--epsilon", epsilon, "temperature / entropic regularization")->check(CLI::PositiveNumber);
    app.add_option("--iters", iterations, "Sinkhorn iterations")->check(CLI::PositiveNumber);
    app.add_flag("--half-step", half_step, "stop after the first row projection");
    app.add_option("--q", q, "RINCE exponent in (0,1]")->check(CLI::Range(0.0, 1.0));
    app.add_option("--lambda", lambda, "RINCE negative weight")->check(CLI::NonNegativeNumber);
    app.add_option("--lambda1", lambda1, "row relaxation weight")->check(CLI::NonNegativeNumber);
    app.add_option("--lambda2", lambda2, "column relaxation weight")->check(CLI::NonNegativeNumber);
    app.add_option("--w", weight, "RINCE share of the UOT loss")->check(CLI::Range(0.0, 1.0));
  }

  LossConfig config() const {
    LossConfig c;
    c.kind = *parse_loss_kind(loss);
    c.epsilon = epsilon;
    c.iterations = iterations;
    c.half_step = half_step;
    c.rince = {q, lambda};
    c.lambda1 = lambda1;
    c.lambda2 = lambda2;
    c.weight = weight;
    c.validate();
    return c;
  }
};

json trajectory_json(const std::vector<TrajectoryPoint>& traj) {
  json arr = json::array();
  for (const auto& p : traj)
    arr.push_back({{"half_step", p.half_step},
                   {"dual", p.dual},
                   {"row_residual", p.row_residual},
                   {"col_residual", p.col_residual}});
  return arr;
}

int cmd_solve(const KernelInput& in, std::optional<std::size_t> iters, std::optional<double> tol,
              std::size_t max_iters, std::ostream& out) {
  const GibbsKernel k = in.kernel();
  const Marginals m = in.marginals(k);
  SolverOptions o;
  o.record_trajectory = !in.diagnostics_path.empty();
  if (tol) {
    o.mode = SolveMode::to_tolerance;
    o.tolerance = *tol;
    o.max_iterations = max_iters;
  } else {
    o.max_iterations = iters.value_or(5);
  }
  const SinkhornResult r = sinkhorn(k, m, o);
  in.emit_plan(r.plan.P, out);
  if (!in.diagnostics_path.empty()) {
    json d = {{"iterations", r.state.iterations},
              {"half_steps", r.state.half_steps},
              {"absorptions", r.state.absorptions},
              {"converged", r.plan.converged},
              {"row_residual", r.plan.row_residual},
              {"col_residual", r.plan.col_residual},
              {"epsilon", k.epsilon()},
              {"dual", solver_dual_objective(r.state.f, r.state.g, k.cost(), k.epsilon(), m)},
              {"trajectory", trajectory_json(r.trajectory)}};
    write_json(d, in.diagnostics_path);
  }
  return ok;
}

int cmd_uot(const KernelInput& in, const UotOptions& opts, std::ostream& out) {
  const GibbsKernel k = in.kernel();
  const Marginals m = in.marginals(k);
  const UotResult r = unbalanced_sinkhorn(k, m, opts);
  in.emit_plan(r.plan.P, out);
  if (!in.diagnostics_path.empty()) {
    json d = {{"iterations", r.state.iterations},
              {"absorptions", r.state.absorptions},
              {"row_residual", r.plan.row_residual},
              {"col_residual", r.plan.col_residual},
              {"lambda1", opts.lambda1},
              {"lambda2", opts.lambda2},
              {"column_normalize", opts.column_normalize},
              {"objective", uot_objective(r.plan.P, k.cost(), k.epsilon(), m, opts.lambda1, opts.lambda2)}};
    write_json(d, in.diagnostics_path);
  }
  return ok;
}

struct TargetFlags {
  std::string domains;
  double alpha = 0.0;
  double beta = 0.0;
  bool raw = false;

  std::optional<TargetPlan> build() const {
    if (domains.empty()) return std::nullopt;
    return block_domain_plan(parse_list<int>(domains, "--domains"), alpha, beta, !raw);
  }
};

int cmd_loss(const LossFlags& lf, const std::string& z1_path, const std::string& z2_path, const TargetFlags& tf,
             const std::string& plan_out, std::ostream& out) {
  LossConfig c = lf.config();
  c.target = tf.build();
  const EmbeddingBatch z1 = normalize_rows(read_matrix(z1_path));
  const EmbeddingBatch z2 = normalize_rows(read_matrix(z2_path));
  const LossResult r = evaluate_loss(c, z1, z2);
  out << fmt(r.value) << '\n';
  if (!plan_out.empty()) write_matrix(r.plan, plan_out);
  return ok;
}

struct TrainFlags {
  LossFlags loss;
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double lr = TrainConfig{}.lr;
  std::uint64_t seed = 0;
  BlobConfig blobs;
  std::optional<double> alpha;
  double beta = 0.0;
  std::string data_path, labels_path, domain_labels_path;
  std::string metrics_path, embeddings_path, representation_path;
  std::string sweep;
  bool probe_embeddings = false;
};

void write_metrics(const fs::path& path, const MetricsRecord& rec) {
  if (!path.empty()) append_metrics_jsonl(rec, path);
}

std::vector<int> read_labels(const std::string& path) {
  std::vector<int> out;
  for (double x : read_vector(path)) {
    if (x < 0 || x != std::floor(x)) throw Error(Errc::parse, path + ": labels must be non-negative integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

int cmd_train(const TrainFlags& tf, std::ostream& out) {
  TrainConfig cfg;
  cfg.loss = tf.loss.config();
  cfg.epochs = tf.epochs;
  cfg.batch = tf.batch;
  cfg.lr = tf.lr;
  cfg.seed = tf.seed;
  BlobConfig blobs = tf.blobs;
  blobs.seed = tf.seed;
  cfg.encoder.input = blobs.dim;

  if (!tf.sweep.empty()) {
    DomainExperimentConfig dc;
    dc.data = blobs;
    dc.train = cfg;
    dc.probe_embeddings = tf.probe_embeddings;
    const auto rows = domain_alignment_experiment(parse_list<double>(tf.sweep, "--sweep"), tf.beta, dc);
    out << "alpha,class_accuracy,domain_accuracy\n";
    for (const auto& r : rows) out << fmt(r.alpha) << ',' << fmt(r.class_accuracy) << ',' << fmt(r.domain_accuracy) << '\n';
    return ok;
  }

  SyntheticDataset data;
  if (!tf.data_path.empty()) {
    data.points = read_matrix(tf.data_path);
    cfg.encoder.input = data.points.cols();
    if (!tf.labels_path.empty()) data.class_labels = read_labels(tf.labels_path);
    data.domain_labels = tf.domain_labels_path.empty() ? std::vector<int>(data.points.rows(), 0)
                                                       : read_labels(tf.domain_labels_path);
    if (!data.class_labels.empty() && data.class_labels.size() != data.points.rows())
      throw Error(Errc::dimension_mismatch, "label count does not match the data rows");
    if (data.domain_labels.size() != data.points.rows())
      throw Error(Errc::dimension_mismatch, "domain label count does not match the data rows");
  } else {
    data = gen_blobs(blobs);
  }
  if (tf.alpha) cfg.domain_plan = std::make_pair(*tf.alpha, tf.beta);

  if (!tf.metrics_path.empty()) {
    std::ofstream truncate(tf.metrics_path, std::ios::trunc);
    if (!truncate) throw Error(Errc::io, "cannot open " + tf.metrics_path + " for writing");
  }
  const TrainResult r = train_encoder(data, cfg, default_augment());
  for (const auto& e : r.history)
    write_metrics(tf.metrics_path, MetricsRecord{static_cast<std::int64_t>(e.epoch),
                                                 {{"loss", e.loss}, {"alignment", e.alignment}, {"uniformity", e.uniformity}}});

  const DenseMatrix rep = encoder_representation(r.encoder, data.points);
  std::optional<double> acc;
  if (!data.class_labels.empty()) {
    acc = linear_probe(rep, data.class_labels, 0.5, tf.seed);
    write_metrics(tf.metrics_path,
                  MetricsRecord{static_cast<std::int64_t>(cfg.epochs), {{"probe_accuracy", *acc}}});
  }
  if (!tf.embeddings_path.empty()) write_matrix(encoder_forward(r.encoder, data.points).embeddings.unit(), tf.embeddings_path);
  if (!tf.representation_path.empty()) write_matrix(rep, tf.representation_path);

  const EpochMetrics& last = r.history.back();
  out << "epoch " << last.epoch << " loss " << fmt(last.loss) << " alignment " << fmt(last.alignment)
      << " uniformity " << fmt(last.uniformity);
  if (acc) out << " probe_accuracy " << fmt(*acc);
  out << '\n';
  return ok;
}

int cmd_verify(const VerifyOptions& opts, const std::string& report, std::ostream& out) {
  const std::vector<PropertyResult> results = run_verification(opts);
  bool all = true;
  json props = json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.instances - r.failures << '/' << r.instances
        << "  worst=" << std::setprecision(3) << r.worst << " tol=" << r.tolerance << '\n';
    if (!r.passed && !r.first_failure.empty()) out << "  first failure: " << r.first_failure << '\n';
    props.push_back({{"name", r.name},
                     {"passed", r.passed},
                     {"instances", r.instances},
                     {"failures", r.failures},
                     {"worst", r.worst},
                     {"tolerance", r.tolerance},
                     {"first_failure", r.first_failure}});
  }
  if (!report.empty())
    write_json({{"seed", opts.seed},
                {"instances", opts.instances},
                {"tolerance_scale", opts.tolerance_scale},
                {"passed", all},
                {"properties", props}},
               report);
  return all ? ok : property_failure;
}

int cmd_plan(const TargetFlags& tf, const std::string& out_path, std::ostream& out) {
  const TargetPlan p = *tf.build();
  if (out_path.empty())
    out << format_matrix_csv(p.values());
  else
    write_matrix(p.values(), out_path);
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized contrastive alignment toolkit"};
  app.name("gca");
  app.require_subcommand(1);

  KernelInput solve_in;
  std::size_t solve_iters = 5, solve_max_iters = 100000;
  double solve_tol = 1e-6;
  auto* solve = app.add_subcommand("solve", "balanced entropic Sinkhorn on a cost or kernel matrix");
  solve_in.add_to(*solve);
  auto* iters_opt = solve->add_option("--iters", solve_iters, "fixed iteration count (default 5)")
                        ->check(CLI::PositiveNumber);
  auto* tol_opt = solve->add_option("--tol", solve_tol, "stop when both marginal L1 errors are below this")
                      ->check(CLI::PositiveNumber);
  iters_opt->excludes(tol_opt);
  solve->add_option("--max-iters", solve_max_iters, "iteration cap in --tol mode")->check(CLI::PositiveNumber);

  KernelInput uot_in;
  UotOptions uot_opts;
  bool no_colnorm = false;
  auto* uot = app.add_subcommand("uot", "KL-relaxed unbalanced Sinkhorn");
  uot_in.add_to(*uot);
  uot->add_option("--lambda1", uot_opts.lambda1, "row relaxation weight (inf for a hard constraint)")
      ->check(CLI::NonNegativeNumber);
  uot->add_option("--lambda2", uot_opts.lambda2, "column relaxation weight")->check(CLI::NonNegativeNumber);
  uot->add_option("--iters", uot_opts.max_iterations, "iterations")->check(CLI::PositiveNumber);
  uot->add_option("--tau", uot_opts.absorption_threshold, "absorption threshold")->check(CLI::Range(1.0, 1e300));
  uot->add_flag("--no-colnorm", no_colnorm, "skip the final column normalization");

  LossFlags loss_flags;
  TargetFlags loss_target;
  std::string z1_path, z2_path, plan_out;
  auto* loss = app.add_subcommand("loss", "evaluate a contrastive loss on two embedding files");
  loss_flags.add_to(*loss);
  loss->add_option("--z1", z1_path, "first view (or predictor output for byol)")->required();
  loss->add_option("--z2", z2_path, "second view")->required();
  loss->add_option("--plan-out", plan_out, "write the transport plan here");
  loss->add_option("--domains", loss_target.domains, "comma separated domain ids for a block target plan");
  loss->add_option("--alpha", loss_target.alpha, "same-domain target weight")->check(CLI::NonNegativeNumber);
  loss->add_option("--beta", loss_target.beta, "cross-domain target weight")->check(CLI::NonNegativeNumber);
  loss->add_flag("--raw", loss_target.raw, "keep the target unnormalized");

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train the MLP encoder on synthetic blobs or a data file");
  tf.loss.add_to(*train);
  train->add_option("--epochs", tf.epochs, "training epochs");
  train->add_option("--batch", tf.batch, "batch size")->check(CLI::Range(2, 1 << 20));
  train->add_option("--lr", tf.lr, "initial learning rate")->check(CLI::PositiveNumber);
  train->add_option("--seed", tf.seed, "seed for data, init and augmentation");
  train->add_option("--classes", tf.blobs.classes, "blob classes")->check(CLI::PositiveNumber);
  train->add_option("--domains", tf.blobs.domains, "blob domains")->check(CLI::PositiveNumber);
  train->add_option("--dim", tf.blobs.dim, "input dimension")->check(CLI::PositiveNumber);
  train->add_option("--per-cell", tf.blobs.per_cell, "points per (class, domain) cell")->check(CLI::PositiveNumber);
  train->add_option("--sigma", tf.blobs.class_sigma, "within-class noise")->check(CLI::NonNegativeNumber);
  train->add_option("--domain-offset", tf.blobs.domain_offset_scale, "domain offset scale")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--alpha", tf.alpha, "same-domain target weight; enables the block target")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--beta", tf.beta, "cross-domain target weight")->check(CLI::NonNegativeNumber);
  train->add_option("--data", tf.data_path, "training points instead of synthetic blobs");
  train->add_option("--labels", tf.labels_path, "class labels for --data, used by the probe");
  train->add_option("--domain-labels", tf.domain_labels_path, "domain labels for --data");
  train->add_option("--metrics", tf.metrics_path, "metrics JSONL output");
  train->add_option("--embeddings", tf.embeddings_path, "final normalized embeddings output");
  train->add_option("--representation", tf.representation_path, "final representation output");
  train->add_option("--sweep", tf.sweep, "comma separated alphas: run the domain alignment experiment");
  train->add_flag("--probe-embeddings", tf.probe_embeddings, "probe the normalized projections in --sweep");

  VerifyOptions vo;
  std::string report, property_list;
  auto* verify = app.add_subcommand("verify", "run the equivalence and monotonicity property suite");
  verify->add_option("-n,--n", vo.instances, "random instances per property")->check(CLI::PositiveNumber);
  verify->add_option("--seed", vo.seed, "base seed");
  verify->add_option("--report", report, "per-property JSON report");
  verify->add_option("--properties", property_list, "comma separated subset");
  verify->add_option("--tolerance-scale", vo.tolerance_scale, "multiplies every tolerance")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--threads", vo.threads, "worker threads (0 = automatic)");

  TargetFlags plan_flags;
  std::string plan_path;
  auto* plan = app.add_subcommand("plan", "build a block-domain target plan");
  plan->add_option("--domains", plan_flags.domains, "comma separated domain ids")->required();
  plan->add_option("--alpha", plan_flags.alpha, "same-domain weight")->check(CLI::NonNegativeNumber);
  plan->add_option("--beta", plan_flags.beta, "cross-domain weight")->check(CLI::NonNegativeNumber);
  plan->add_flag("--raw", plan_flags.raw, "skip normalization to mass B");
  plan->add_option("-o,--out", plan_path, "output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (solve->parsed()) {
      std::optional<std::size_t> it;
      std::optional<double> tol;
      if (iters_opt->count()) it = solve_iters;
      if (tol_opt->count()) tol = solve_tol;
      return cmd_solve(solve_in, it, tol, solve_max_iters, out);
    }
    if (uot->parsed()) {
      uot_opts.column_normalize = !no_colnorm;
      return cmd_uot(uot_in, uot_opts, out);
    }
    if (loss->parsed()) return cmd_loss(loss_flags, z1_path, z2_path, loss_target, plan_out, out);
    if (train->parsed()) return cmd_train(tf, out);
    if (verify->parsed()) {
      if (!property_list.empty()) {
        std::istringstream s(property_list);
        for (std::string p; std::getline(s, p, ',');)
          if (!p.empty()) vo.properties.push_back(p);
      }
      return cmd_verify(vo, report, out);
    }
    if (plan->parsed()) return cmd_plan(plan_flags, plan_path, out);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << "run 'gca --help' for usage\n";
    return usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }
  return usage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gca::cli
