#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gca/kernel.hpp"

namespace gca {

struct BatchPair {
  DenseMatrix z1_raw;
  DenseMatrix z2_raw;
  EmbeddingBatch z1;
  EmbeddingBatch z2;
};

// Z1 Gaussian; Z2 = Z1 + sigma * noise, so the views are positively paired.
BatchPair random_batch_pair(std::mt19937_64& rng, std::size_t batch, std::size_t dim, double sigma);

// Draws B in [4, 64], d in [4, 32], eps from {0.1, 0.5, 1} and sigma from {0.1, 0.5, 1}.
struct RandomInstance {
  BatchPair pair;
  double epsilon = 0.5;
  double sigma = 0.5;
};
RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_batch = 64);

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  std::size_t failures = 0;
  // Largest observed violation measure; compared against tolerance.
  double worst = 0.0;
  double tolerance = 0.0;
  std::string first_failure;
};

struct VerifyOptions {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  // Multiplies every tolerance; 0 turns each check into an exact comparison.
  double tolerance_scale = 1.0;
  std::vector<std::string> properties;  // empty selects all
  std::size_t threads = 0;              // 0 reads GCA_THREADS, else hardware concurrency
};

std::vector<std::string_view> property_names();

PropertyResult run_property(std::string_view name, const VerifyOptions& options);
std::vector<PropertyResult> run_verification(const VerifyOptions& options);

std::size_t resolve_threads(std::size_t requested);

}  // namespace gca
