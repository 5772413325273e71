#pragma once

// Layer primitives with explicit forward and backward passes. Every
// function is pure: state that changes (batch-norm running statistics) is
// returned rather than mutated.

#include <cstddef>
#include <vector>

#include "rankscl/tensor.hpp"

namespace rankscl {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// conv1d: zero-padded "same" convolution over [B, C_in, T] inputs.
//
// Padding is (K-1)/2 on the left and K-1-(K-1)/2 on the right, so odd kernels
// are centered and even kernels lean one step to the right.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv1dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& grad_output);

// ---------------------------------------------------------------------------
// batchnorm1d: per-channel normalization over the (B, T) axes.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  Mode mode = Mode::train;

  // gamma = 1, beta = 0, running mean 0 and variance 1.
  static BatchNormState fresh(std::size_t channels);
  std::size_t channels() const noexcept { return gamma.size(); }
};

// Statistics the forward pass used, needed by the backward pass.
struct BatchNormSaved {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

template <typename T>
struct BatchNormResult {
  Tensor<T> output;
  BatchNormState<T> state;  // running statistics after this call
  BatchNormSaved saved;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

// Train mode normalizes with the biased batch variance and blends the
// unbiased batch variance into the running estimate. Throws NumericError
// when B*T == 1 in train mode.
template <typename T>
BatchNormResult<T> batchnorm1d(const Tensor<T>& input, const BatchNormState<T>& state);

template <typename T>
BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>& input, const BatchNormState<T>& state,
                                       const BatchNormSaved& saved,
                                       const Tensor<T>& grad_output);

// ---------------------------------------------------------------------------
// Elementwise / pooling / dense / normalization.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

// Gradient at exactly zero is zero.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

// [B, C, T] -> [B, C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_output, std::size_t length);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

// input [B, Din], weight [Dout, Din], bias [Dout] -> input * weight^T + bias
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_output);

inline constexpr double kDefaultNormEpsilon = 1e-12;

// Row i becomes input_i / (||input_i|| + epsilon).
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& input, double epsilon = kDefaultNormEpsilon);

template <typename T>
Tensor<T> l2_normalize_rows_backward(const Tensor<T>& input, const Tensor<T>& grad_output,
                                     double epsilon = kDefaultNormEpsilon);

}  // namespace rankscl
