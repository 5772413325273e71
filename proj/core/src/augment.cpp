#include "rankscl/augment.hpp"

#include <algorithm>
#include <string>

#include "rankscl/errors.hpp"
#include "rankscl/layers.hpp"

namespace rankscl {

void AugmentConfig::validate() const {
  if (num_augments > 0 && scales.empty()) {
    throw ConfigError("augment: " + std::to_string(num_augments) +
                      " copies requested but no jitter scales given");
  }
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("augment: jitter scales must be > 0");
  }
}

template <typename T>
Tensor<T> jitter(const Tensor<T>& z, double alpha, Rng& rng) {
  if (alpha < 0.0) throw ContractError("jitter: alpha must be >= 0");
  Tensor<T> out = z;
  for (T& v : out.values()) v = static_cast<T>(v + alpha * rng.normal());
  return out;
}

template <typename T>
EmbeddingBatch<T> expand_batch(const Tensor<T>& z, const std::vector<int>& labels,
                               const AugmentConfig& config, Rng& rng) {
  config.validate();
  require_rank(z, 2, "expand_batch z");
  const std::size_t rows = z.dim(0), dim = z.dim(1);
  if (labels.size() != rows) {
    throw DimensionError("expand_batch: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  const std::size_t copies = config.num_augments;
  const std::size_t total = rows * (1 + copies);

  EmbeddingBatch<T> batch;
  batch.unnormalized = Tensor<T>({total, dim});
  batch.labels.reserve(total);
  batch.is_augmented.reserve(total);
  batch.source.reserve(total);

  std::copy(z.raw(), z.raw() + z.size(), batch.unnormalized.raw());
  for (std::size_t i = 0; i < rows; ++i) {
    batch.labels.push_back(labels[i]);
    batch.is_augmented.push_back(false);
    batch.source.push_back(i);
  }
  for (std::size_t j = 0; j < copies; ++j) {
    const Tensor<T> noisy = jitter(z, config.scales[j % config.scales.size()], rng);
    std::copy(noisy.raw(), noisy.raw() + noisy.size(),
              batch.unnormalized.raw() + (j + 1) * rows * dim);
    for (std::size_t i = 0; i < rows; ++i) {
      batch.labels.push_back(labels[i]);
      batch.is_augmented.push_back(true);
      batch.source.push_back(i);
    }
  }
  batch.z = l2_normalize_rows(batch.unnormalized);
  return batch;
}

template <typename T>
Tensor<T> expand_batch_backward(const EmbeddingBatch<T>& batch, const Tensor<T>& grad_z,
                                std::size_t source_rows) {
  if (grad_z.shape() != batch.z.shape()) {
    throw DimensionError("expand_batch_backward: gradient shape " + shape_string(grad_z.shape()) +
                         " vs batch " + shape_string(batch.z.shape()));
  }
  const std::size_t dim = batch.z.dim(1);
  const Tensor<T> g = l2_normalize_rows_backward(batch.unnormalized, grad_z);
  Tensor<T> out({source_rows, dim});
  for (std::size_t i = 0; i < batch.source.size(); ++i) {
    const std::size_t s = batch.source[i];
    if (s >= source_rows) throw ContractError("expand_batch_backward: source row out of range");
    for (std::size_t k = 0; k < dim; ++k) out(s, k) += g(i, k);
  }
  return out;
}

template Tensor<float> jitter(const Tensor<float>&, double, Rng&);
template Tensor<double> jitter(const Tensor<double>&, double, Rng&);
template EmbeddingBatch<float> expand_batch(const Tensor<float>&, const std::vector<int>&,
                                            const AugmentConfig&, Rng&);
template EmbeddingBatch<double> expand_batch(const Tensor<double>&, const std::vector<int>&,
                                             const AugmentConfig&, Rng&);
template Tensor<float> expand_batch_backward(const EmbeddingBatch<float>&, const Tensor<float>&,
                                             std::size_t);
template Tensor<double> expand_batch_backward(const EmbeddingBatch<double>&, const Tensor<double>&,
                                              std::size_t);

}  // namespace rankscl
