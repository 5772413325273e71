#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rankscl/rng.hpp"
#include "rankscl/tensor.hpp"

namespace rankscl {

struct AugmentConfig {
  // Total jittered copies per instance; copy j uses scales[j % scales.size()].
  std::size_t num_augments = 5;
  std::vector<double> scales{0.03, 0.05};
  std::uint64_t rng_seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Projected embeddings of one batch, originals first, then copy 0 of every
// row, copy 1 of every row, and so on.
template <typename T>
struct EmbeddingBatch {
  Tensor<T> r;                        // encoder representations of the source rows, if known
  Tensor<T> z;                        // [B * (1 + m), D], unit rows
  Tensor<T> unnormalized;             // z before the final normalization
  std::vector<int> labels;            // label of each row of z
  std::vector<bool> is_augmented;
  std::vector<std::size_t> source;    // source row in the input batch
};

// z + N(0, alpha^2) noise via Box-Muller. The noise is a constant for
// differentiation.
template <typename T>
Tensor<T> jitter(const Tensor<T>& z, double alpha, Rng& rng);

template <typename T>
EmbeddingBatch<T> expand_batch(const Tensor<T>& z, const std::vector<int>& labels,
                               const AugmentConfig& config, Rng& rng);

// Gradient w.r.t. the input z, given the gradient w.r.t. the expanded,
// normalized batch. Each source row collects contributions of all its copies.
template <typename T>
Tensor<T> expand_batch_backward(const EmbeddingBatch<T>& batch, const Tensor<T>& grad_z,
                                std::size_t source_rows);

}  // namespace rankscl
