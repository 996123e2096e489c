#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gca/kernel.hpp"
#include "gca/losses.hpp"

namespace gca {

struct BlobConfig {
  std::size_t classes = 4;
  std::size_t domains = 1;
  std::size_t dim = 16;
  std::size_t per_cell = 50;
  double class_sigma = 0.5;
  double domain_offset_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  DenseMatrix points;
  std::vector<int> class_labels;
  std::vector<int> domain_labels;
  BlobConfig config;
};

// Point = 3 * (unit class centroid) + domain offset + N(0, sigma^2 I), per cell.
SyntheticDataset gen_blobs(const BlobConfig& config);

struct AugmentConfig {
  double jitter_sigma = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double dropout_prob = 0.0;

  void validate() const;
};

// Row-wise x' = dropout(s * x + jitter), with s ~ U[scale_min, scale_max] per row.
DenseMatrix augment(const DenseMatrix& x, const AugmentConfig& config, std::mt19937_64& rng);

enum class Activation { relu, identity };

struct DenseLayer {
  DenseMatrix weight;  // out x in
  Vector bias;
  DenseMatrix grad_weight;
  Vector grad_bias;
};

struct EncoderShape {
  std::size_t input = 16;
  std::size_t hidden = 64;
  std::size_t representation = 32;
  std::size_t projection = 16;
  Activation activation = Activation::relu;
};

// input -> hidden (act) -> representation, then projector act -> projection.
// Embeddings are the normalized projector outputs; probes read the representation.
class MlpEncoder {
 public:
  MlpEncoder(const EncoderShape& shape, std::uint64_t seed);

  const EncoderShape& shape() const noexcept { return shape_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::uint64_t version() const noexcept { return version_; }

  std::size_t parameter_count() const noexcept;
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  Vector gradients() const;
  void zero_grad();
  void sgd_step(double lr);

 private:
  EncoderShape shape_;
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct EncoderCache {
  std::uint64_t version = 0;
  DenseMatrix input;
  DenseMatrix hidden_pre;
  DenseMatrix representation;
  DenseMatrix projector_in;
  DenseMatrix projection;  // raw projector output
  EmbeddingBatch embeddings;
};

EncoderCache encoder_forward(const MlpEncoder& enc, const DenseMatrix& batch);
DenseMatrix encoder_representation(const MlpEncoder& enc, const DenseMatrix& batch);

// Accumulates parameter gradients for a gradient w.r.t. the normalized embeddings.
void encoder_backward(MlpEncoder& enc, const EncoderCache& cache, const DenseMatrix& grad_embeddings);

struct TrainConfig {
  LossConfig loss;
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double lr = 0.5;
  // The rate decays linearly to lr * final_lr_fraction.
  double final_lr_fraction = 1e-3;
  std::uint64_t seed = 0;
  double uniformity_t = 2.0;
  EncoderShape encoder;
  // When set, each batch uses block_domain_plan(domains, alpha, beta) as its target.
  std::optional<std::pair<double, double>> domain_plan;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
};

struct TrainResult {
  MlpEncoder encoder;
  std::vector<EpochMetrics> history;
};

AugmentConfig default_augment();

TrainResult train_encoder(const SyntheticDataset& data, const TrainConfig& config, const AugmentConfig& aug);

double linear_probe(const DenseMatrix& features, const std::vector<int>& labels, double train_fraction,
                    std::uint64_t seed);

struct DomainExperimentConfig {
  BlobConfig data;
  TrainConfig train;
  AugmentConfig aug = default_augment();
  double train_fraction = 0.5;
  // Probe the normalized projector output instead of the representation.
  bool probe_embeddings = false;
};

struct DomainExperimentRow {
  double alpha = 0.0;
  double class_accuracy = 0.0;
  double domain_accuracy = 0.0;
};

std::vector<DomainExperimentRow> domain_alignment_experiment(const std::vector<double>& alphas, double beta,
                                                             const DomainExperimentConfig& config);

}  // namespace gca
