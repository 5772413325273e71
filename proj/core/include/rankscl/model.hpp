#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rankscl/adam.hpp"
#include "rankscl/layers.hpp"
#include "rankscl/tensor.hpp"

namespace rankscl {

struct EncoderConfig {
  std::size_t in_features = 1;
  std::vector<std::size_t> conv_channels{128, 256, 128};
  std::vector<std::size_t> kernel_sizes{8, 5, 3};
  std::size_t repr_dim = 320;
  // When false the representation is the pooled conv output itself
  // (dimension conv_channels.back()) and there is no dense layer after GAP.
  bool dense_repr = true;

  // Throws ConfigError.
  void validate() const;
  std::size_t representation_dim() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename T>
struct ConvBlock {
  Tensor<T> weight;  // [C_out, C_in, K]
  Tensor<T> bias;    // [C_out]
  BatchNormState<T> bn;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct NamedConstTensor {
  std::string name;
  const Tensor<T>* tensor;
};

// Encoder f (conv-BN-ReLU blocks, GAP, dense) plus projection head g
// (dense-ReLU-dense-normalize), their optimizer moments and the seed they
// were initialized from.
template <typename T>
struct ModelState {
  EncoderConfig config;
  std::vector<ConvBlock<T>> blocks;
  Tensor<T> fc_weight;  // [D, C_last]; empty when !config.dense_repr
  Tensor<T> fc_bias;
  Tensor<T> head1_weight;  // [D, D]
  Tensor<T> head1_bias;
  Tensor<T> head2_weight;  // [D, D]
  Tensor<T> head2_bias;
  std::vector<AdamState<T>> adam;  // aligned with parameters()
  std::uint64_t rng_seed = 0;

  // Trainable tensors in a fixed order: conv{i}.weight, conv{i}.bias,
  // bn{i}.gamma, bn{i}.beta for each block, then fc.*, head1.*, head2.*.
  std::vector<NamedTensor<T>> parameters();
  std::vector<NamedConstTensor<T>> parameters() const;
  // Running statistics: bn{i}.running_mean, bn{i}.running_var.
  std::vector<NamedTensor<T>> buffers();
  std::vector<NamedConstTensor<T>> buffers() const;

  std::size_t parameter_count() const;
  void set_mode(Mode mode);
  void set_adam_hyper(const AdamHyper& hyper);

  template <typename U>
  ModelState<U> cast() const;
};

// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every
// conv and dense layer (biases included); BN gamma=1, beta=0; zero moments.
template <typename T>
ModelState<T> init_model(const EncoderConfig& config, std::uint64_t seed,
                         const AdamHyper& hyper = {});

// Throws DimensionError when `features` differs from the model's input width.
template <typename T>
void check_input_features(const ModelState<T>& model, std::size_t features);

// Intermediate activations of one forward pass, kept for backprop.
template <typename T>
struct BlockTrace {
  Tensor<T> input;
  Tensor<T> conv_out;
  BatchNormResult<T> bn;
};

template <typename T>
struct ForwardTrace {
  Mode mode = Mode::eval;
  std::vector<BlockTrace<T>> blocks;
  Tensor<T> last_activation;  // ReLU output of the final block
  Tensor<T> pooled;           // [B, C_last]
  Tensor<T> r;                // [B, D]
  Tensor<T> head_hidden;      // pre-ReLU output of head1
  Tensor<T> head_out;         // head2 output before normalization
  Tensor<T> z;                // [B, D], unit rows
};

// Runs encoder and projection head on x [B, F, T]. Throws NumericError when
// x contains NaN/Inf and DimensionError on a feature-count mismatch.
template <typename T>
ForwardTrace<T> forward(const ModelState<T>& model, const Tensor<T>& x, Mode mode);

// Gradients aligned with ModelState::parameters().
template <typename T>
using ParameterGrads = std::vector<Tensor<T>>;

// Backprop from dL/dz (and optionally dL/dr; pass an empty tensor for none).
template <typename T>
ParameterGrads<T> backward(const ModelState<T>& model, const ForwardTrace<T>& trace,
                           const Tensor<T>& grad_z, const Tensor<T>& grad_r = {});

// Commits the running statistics a train-mode forward produced.
template <typename T>
void commit_batchnorm(ModelState<T>& model, const ForwardTrace<T>& trace);

// Encoder only. Train mode updates the BN running statistics in `model`.
template <typename T>
Tensor<T> encode(ModelState<T>& model, const Tensor<T>& x, Mode mode);

// Eval-mode encoder on an immutable model, processed in chunks of
// `batch_size` rows so large datasets stay within memory.
template <typename T>
Tensor<T> encode_eval(const ModelState<T>& model, const Tensor<T>& x,
                      std::size_t batch_size = 256);

// Projection head: dense -> ReLU -> dense -> l2-normalize. Training only.
template <typename T>
Tensor<T> project(const ModelState<T>& model, const Tensor<T>& r);

// One Adam step over every parameter.
template <typename T>
void apply_gradients(ModelState<T>& model, const ParameterGrads<T>& grads);

}  // namespace rankscl
