#include "gca/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gca/error.hpp"
#include "gca/metrics.hpp"
#include "gca/plans.hpp"

namespace gca {

void BlobConfig::validate() const {
  if (classes < 1 || domains < 1) throw Error(Errc::invalid_argument, "need at least one class and one domain");
  if (dim < 2) throw Error(Errc::invalid_argument, "dim must be >= 2");
  if (per_cell < 1) throw Error(Errc::invalid_argument, "per_cell must be >= 1");
  if (!(class_sigma >= 0.0) || !(domain_offset_scale >= 0.0))
    throw Error(Errc::invalid_argument, "spreads must be non-negative");
}

namespace {

Vector random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = n01(rng);
    norm = std::sqrt(dot(v, v));
  }
  for (double& x : v) x /= norm;
  return v;
}

double act(Activation a, double x) { return a == Activation::relu ? std::max(x, 0.0) : x; }
double act_grad(Activation a, double x) { return a == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : 1.0; }

DenseMatrix apply_act(Activation a, const DenseMatrix& x) {
  DenseMatrix out = x;
  for (double& v : out.data()) v = act(a, v);
  return out;
}

// x W^T + b
DenseMatrix affine(const DenseMatrix& x, const DenseLayer& layer) {
  DenseMatrix out = matmul_nt(x, layer.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
  }
  return out;
}

// Accumulates the layer gradients for upstream g and returns the gradient w.r.t. its input.
DenseMatrix affine_backward(DenseLayer& layer, const DenseMatrix& input, const DenseMatrix& g) {
  const DenseMatrix gw = matmul_tn(g, input);
  for (std::size_t n = 0; n < gw.size(); ++n) layer.grad_weight.data()[n] += gw.data()[n];
  const Vector gb = col_sums(g);
  for (std::size_t j = 0; j < gb.size(); ++j) layer.grad_bias[j] += gb[j];
  return matmul(g, layer.weight);
}

DenseLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  DenseLayer l;
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> uni(-bound, bound);
  l.weight = DenseMatrix(out, in);
  for (double& x : l.weight.data()) x = uni(rng);
  l.bias.assign(out, 0.0);
  l.grad_weight = DenseMatrix(out, in);
  l.grad_bias.assign(out, 0.0);
  return l;
}

DenseMatrix select_rows(const DenseMatrix& x, std::span<const std::size_t> idx) {
  DenseMatrix out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(x.row(idx[r]).begin(), x.cols(), out.row(r).begin());
  return out;
}

}  // namespace

SyntheticDataset gen_blobs(const BlobConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<Vector> centroids, offsets;
  for (std::size_t c = 0; c < config.classes; ++c) {
    Vector v = random_unit(config.dim, rng);
    for (double& x : v) x *= 3.0;
    centroids.push_back(std::move(v));
  }
  for (std::size_t m = 0; m < config.domains; ++m) {
    Vector v = random_unit(config.dim, rng);
    for (double& x : v) x *= config.domain_offset_scale;
    offsets.push_back(std::move(v));
  }

  SyntheticDataset ds;
  ds.config = config;
  const std::size_t n = config.classes * config.domains * config.per_cell;
  ds.points = DenseMatrix(n, config.dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < config.classes; ++c)
    for (std::size_t m = 0; m < config.domains; ++m)
      for (std::size_t k = 0; k < config.per_cell; ++k, ++row) {
        auto r = ds.points.row(row);
        for (std::size_t j = 0; j < config.dim; ++j)
          r[j] = centroids[c][j] + offsets[m][j] + config.class_sigma * noise(rng);
        ds.class_labels.push_back(static_cast<int>(c));
        ds.domain_labels.push_back(static_cast<int>(m));
      }
  return ds;
}

void AugmentConfig::validate() const {
  if (!(jitter_sigma >= 0.0)) throw Error(Errc::invalid_argument, "jitter_sigma must be >= 0");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min))
    throw Error(Errc::invalid_argument, "scale range must be positive and ordered");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw Error(Errc::invalid_argument, "dropout_prob must lie in [0,1)");
}

AugmentConfig default_augment() { return {0.5, 0.8, 1.2, 0.1}; }

DenseMatrix augment(const DenseMatrix& x, const AugmentConfig& config, std::mt19937_64& rng) {
  config.validate();
  DenseMatrix out = x;
  std::uniform_real_distribution<double> scale(config.scale_min, config.scale_max);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::bernoulli_distribution drop(config.dropout_prob);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double s = config.scale_max > config.scale_min ? scale(rng) : config.scale_min;
    for (double& v : out.row(i)) {
      v *= s;
      if (config.jitter_sigma > 0.0) v += config.jitter_sigma * jitter(rng);
      if (config.dropout_prob > 0.0 && drop(rng)) v = 0.0;
    }
  }
  return out;
}

MlpEncoder::MlpEncoder(const EncoderShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.input == 0 || shape.hidden == 0 || shape.representation == 0 || shape.projection == 0)
    throw Error(Errc::invalid_argument, "encoder layer sizes must be positive");
  std::mt19937_64 rng(seed);
  layers_.push_back(make_layer(shape.input, shape.hidden, rng));
  layers_.push_back(make_layer(shape.hidden, shape.representation, rng));
  layers_.push_back(make_layer(shape.representation, shape.projection, rng));
}

std::size_t MlpEncoder::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector MlpEncoder::parameters() const {
  Vector flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void MlpEncoder::set_parameters(const Vector& flat) {
  if (flat.size() != parameter_count())
    throw Error(Errc::dimension_mismatch, "expected " + std::to_string(parameter_count()) + " parameters");
  auto it = flat.begin();
  for (auto& l : layers_) {
    std::copy_n(it, l.weight.size(), l.weight.data().begin());
    it += static_cast<std::ptrdiff_t>(l.weight.size());
    std::copy_n(it, l.bias.size(), l.bias.begin());
    it += static_cast<std::ptrdiff_t>(l.bias.size());
  }
  ++version_;
}

Vector MlpEncoder::gradients() const {
  Vector flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.grad_weight.data().begin(), l.grad_weight.data().end());
    flat.insert(flat.end(), l.grad_bias.begin(), l.grad_bias.end());
  }
  return flat;
}

void MlpEncoder::zero_grad() {
  for (auto& l : layers_) {
    std::fill(l.grad_weight.data().begin(), l.grad_weight.data().end(), 0.0);
    std::fill(l.grad_bias.begin(), l.grad_bias.end(), 0.0);
  }
}

void MlpEncoder::sgd_step(double lr) {
  for (auto& l : layers_) {
    for (std::size_t n = 0; n < l.weight.size(); ++n) l.weight.data()[n] -= lr * l.grad_weight.data()[n];
    for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= lr * l.grad_bias[j];
  }
  ++version_;
}

EncoderCache encoder_forward(const MlpEncoder& enc, const DenseMatrix& batch) {
  if (batch.cols() != enc.shape().input)
    throw Error(Errc::dimension_mismatch, "encoder expects " + std::to_string(enc.shape().input) +
                                              " input features, got " + std::to_string(batch.cols()));
  const Activation a = enc.shape().activation;
  const auto& layers = enc.layers();
  EncoderCache c;
  c.version = enc.version();
  c.input = batch;
  c.hidden_pre = affine(batch, layers[0]);
  c.representation = affine(apply_act(a, c.hidden_pre), layers[1]);
  c.projector_in = apply_act(a, c.representation);
  c.projection = affine(c.projector_in, layers[2]);
  c.embeddings = normalize_rows(c.projection);
  return c;
}

DenseMatrix encoder_representation(const MlpEncoder& enc, const DenseMatrix& batch) {
  if (batch.cols() != enc.shape().input) throw Error(Errc::dimension_mismatch, "encoder input width");
  const Activation a = enc.shape().activation;
  return affine(apply_act(a, affine(batch, enc.layers()[0])), enc.layers()[1]);
}

void encoder_backward(MlpEncoder& enc, const EncoderCache& cache, const DenseMatrix& grad_embeddings) {
  if (cache.version != enc.version())
    throw Error(Errc::stale_cache, "cache from parameter version " + std::to_string(cache.version) +
                                       ", encoder is at " + std::to_string(enc.version()));
  const Activation a = enc.shape().activation;
  auto& layers = enc.layers();
  const DenseMatrix g_proj = normalize_rows_backward(cache.embeddings, grad_embeddings);
  DenseMatrix g = affine_backward(layers[2], cache.projector_in, g_proj);
  for (std::size_t n = 0; n < g.size(); ++n) g.data()[n] *= act_grad(a, cache.representation.data()[n]);
  g = affine_backward(layers[1], apply_act(a, cache.hidden_pre), g);
  for (std::size_t n = 0; n < g.size(); ++n) g.data()[n] *= act_grad(a, cache.hidden_pre.data()[n]);
  affine_backward(layers[0], cache.input, g);
}

void TrainConfig::validate() const {
  loss.validate();
  if (batch < 4) throw Error(Errc::invalid_argument, "batch size must be >= 4");
  if (!(lr > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be positive");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
    throw Error(Errc::invalid_argument, "final_lr_fraction must lie in (0,1]");
  if (domain_plan && (!(domain_plan->first >= 0.0) || !(domain_plan->second >= 0.0)))
    throw Error(Errc::invalid_argument, "domain plan weights must be non-negative");
}

TrainResult train_encoder(const SyntheticDataset& data, const TrainConfig& config, const AugmentConfig& aug) {
  config.validate();
  aug.validate();
  const std::size_t n = data.points.rows();
  const std::size_t b = config.batch;
  if (n < b)
    throw Error(Errc::invalid_argument, "dataset has " + std::to_string(n) + " points, fewer than one batch of " +
                                            std::to_string(b));
  EncoderShape shape = config.encoder;
  shape.input = data.points.cols();
  TrainResult result{MlpEncoder(shape, config.seed), {}};
  MlpEncoder& enc = result.encoder;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 eval_rng(config.seed + 1);
  const DenseMatrix eval1 = augment(data.points, aug, eval_rng);
  const DenseMatrix eval2 = augment(data.points, aug, eval_rng);

  const std::size_t per_epoch = n / b;
  const std::size_t total_steps = config.epochs * per_epoch;

  auto batch_loss_config = [&](std::span<const std::size_t> idx) {
    LossConfig lc = config.loss;
    if (config.domain_plan) {
      std::vector<int> doms(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) doms[k] = data.domain_labels[idx[k]];
      lc.target = block_domain_plan(doms, config.domain_plan->first, config.domain_plan->second);
    }
    return lc;
  };

  auto snapshot = [&](std::size_t epoch, double loss) {
    const EncoderCache c1 = encoder_forward(enc, eval1);
    const EncoderCache c2 = encoder_forward(enc, eval2);
    result.history.push_back(
        {epoch, loss, alignment_loss(c1.embeddings, c2.embeddings), uniformity_loss(c1.embeddings, config.uniformity_t)});
  };

  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    double s = 0.0;
    for (std::size_t k = 0; k < per_epoch; ++k) {
      std::span<const std::size_t> idx(order.data() + k * b, b);
      const EncoderCache c1 = encoder_forward(enc, select_rows(eval1, idx));
      const EncoderCache c2 = encoder_forward(enc, select_rows(eval2, idx));
      s += evaluate_loss(batch_loss_config(idx), c1.embeddings, c2.embeddings).value / static_cast<double>(b);
    }
    snapshot(0, s / static_cast<double>(per_epoch));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t k = 0; k < per_epoch; ++k, ++step) {
      std::span<const std::size_t> idx(order.data() + k * b, b);
      const DenseMatrix x = select_rows(data.points, idx);
      const DenseMatrix x1 = augment(x, aug, rng);
      const DenseMatrix x2 = augment(x, aug, rng);
      const EncoderCache c1 = encoder_forward(enc, x1);
      const EncoderCache c2 = encoder_forward(enc, x2);
      LossResult r;
      try {
        r = evaluate_loss(batch_loss_config(idx), c1.embeddings, c2.embeddings);
      } catch (const Error& e) {
        throw Error(Errc::non_finite_loss,
                    "epoch " + std::to_string(epoch) + ", batch " + std::to_string(k) + ": " + e.what());
      }
      if (!std::isfinite(r.value))
        throw Error(Errc::non_finite_loss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(k));
      const double inv_b = 1.0 / static_cast<double>(b);
      epoch_loss += r.value * inv_b;
      for (double& v : r.unit_grad_z1.data()) v *= inv_b;
      for (double& v : r.unit_grad_z2.data()) v *= inv_b;
      enc.zero_grad();
      encoder_backward(enc, c1, r.unit_grad_z1);
      encoder_backward(enc, c2, r.unit_grad_z2);
      const double frac = total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 0.0;
      enc.sgd_step(config.lr * (1.0 - (1.0 - config.final_lr_fraction) * frac));
    }
    snapshot(epoch, epoch_loss / static_cast<double>(per_epoch));
  }
  return result;
}

double linear_probe(const DenseMatrix& features, const std::vector<int>& labels, double train_fraction,
                    std::uint64_t seed) {
  const std::size_t n = features.rows(), d = features.cols();
  if (labels.size() != n) throw Error(Errc::dimension_mismatch, "linear_probe: labels vs rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(Errc::invalid_argument, "train_fraction must lie in (0,1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 2 || n_train >= n) throw Error(Errc::degenerate_split, "split leaves an empty side");

  int k = 0;
  for (int l : labels) {
    if (l < 0) throw Error(Errc::invalid_argument, "negative label");
    k = std::max(k, l + 1);
  }
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  for (std::size_t t = 0; t < n_train; ++t) seen[static_cast<std::size_t>(labels[order[t]])] = 1;
  if (std::count(seen.begin(), seen.end(), 1) < 2)
    throw Error(Errc::degenerate_split, "train split has fewer than two classes");

  Vector mean(d, 0.0), sd(d, 0.0);
  for (std::size_t t = 0; t < n_train; ++t)
    for (std::size_t j = 0; j < d; ++j) mean[j] += features(order[t], j);
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (std::size_t t = 0; t < n_train; ++t)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(features(order[t], j) - mean[j], 2);
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(n_train));
  for (double& s : sd)
    if (!(s > 1e-12)) s = 1.0;

  auto standardized = [&](std::size_t from, std::size_t to) {
    DenseMatrix x(to - from, d);
    for (std::size_t t = from; t < to; ++t)
      for (std::size_t j = 0; j < d; ++j) x(t - from, j) = (features(order[t], j) - mean[j]) / sd[j];
    return x;
  };
  const DenseMatrix xtr = standardized(0, n_train);
  const DenseMatrix xte = standardized(n_train, n);

  const auto kk = static_cast<std::size_t>(k);
  DenseMatrix w(kk, d);
  Vector bias(kk, 0.0);
  auto logits = [&](const DenseMatrix& x) {
    DenseMatrix z = matmul_nt(x, w);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t c = 0; c < kk; ++c) z(i, c) += bias[c];
    return z;
  };
  constexpr int kSteps = 500;
  constexpr double kRate = 0.1;
  for (int s = 0; s < kSteps; ++s) {
    DenseMatrix g = logits(xtr);
    for (std::size_t i = 0; i < n_train; ++i) {
      auto r = g.row(i);
      const double mx = *std::max_element(r.begin(), r.end());
      double z = 0.0;
      for (double& v : r) z += (v = std::exp(v - mx));
      for (double& v : r) v /= z;
      r[static_cast<std::size_t>(labels[order[i]])] -= 1.0;
      for (double& v : r) v /= static_cast<double>(n_train);
    }
    const DenseMatrix gw = matmul_tn(g, xtr);
    const Vector gb = col_sums(g);
    for (std::size_t m = 0; m < w.size(); ++m) w.data()[m] -= kRate * gw.data()[m];
    for (std::size_t c = 0; c < kk; ++c) bias[c] -= kRate * gb[c];
  }

  const DenseMatrix z = logits(xte);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto r = z.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    if (static_cast<int>(pred) == labels[order[n_train + i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

std::vector<DomainExperimentRow> domain_alignment_experiment(const std::vector<double>& alphas, double beta,
                                                             const DomainExperimentConfig& config) {
  if (config.data.domains < 2) throw Error(Errc::invalid_argument, "the domain experiment needs >= 2 domains");
  const SyntheticDataset data = gen_blobs(config.data);
  std::vector<DomainExperimentRow> rows;
  for (double alpha : alphas) {
    TrainConfig tc = config.train;
    tc.domain_plan = std::make_pair(alpha, beta);
    const TrainResult tr = train_encoder(data, tc, config.aug);
    const DenseMatrix rep = config.probe_embeddings ? encoder_forward(tr.encoder, data.points).embeddings.unit()
                                                    : encoder_representation(tr.encoder, data.points);
    rows.push_back({alpha, linear_probe(rep, data.class_labels, config.train_fraction, config.train.seed),
                    linear_probe(rep, data.domain_labels, config.train_fraction, config.train.seed)});
  }
  return rows;
}

}  // namespace gca
