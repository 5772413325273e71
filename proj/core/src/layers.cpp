#include "rankscl/layers.hpp"

#include <cmath>
#include <string>

#include "eigen_maps.hpp"
#include "rankscl/errors.hpp"

namespace rankscl {

using detail::as_matrix;
using detail::RowMatrix;

namespace {

std::size_t left_padding(std::size_t kernel) { return (kernel - 1) / 2; }

// col[(c*K + k), b*L + t] = input[b, c, t + k - pad] (zero outside).
template <typename T>
RowMatrix<T> im2col(const Tensor<T>& input, std::size_t kernel) {
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(left_padding(kernel));
  RowMatrix<T> col(static_cast<Eigen::Index>(channels * kernel),
                   static_cast<Eigen::Index>(batch * length));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      T* row = col.row(static_cast<Eigen::Index>(c * kernel + k)).data();
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = input.raw() + (b * channels + c) * length;
        T* dst = row + b * length;
        for (std::size_t t = 0; t < length; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + shift;
          dst[t] = (s >= 0 && s < static_cast<std::ptrdiff_t>(length)) ? src[s] : T{0};
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(const RowMatrix<T>& col, std::size_t kernel, Tensor<T>& grad_input) {
  const std::size_t batch = grad_input.dim(0), channels = grad_input.dim(1),
                    length = grad_input.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(left_padding(kernel));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const T* row = col.row(static_cast<Eigen::Index>(c * kernel + k)).data();
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::size_t b = 0; b < batch; ++b) {
        T* dst = grad_input.raw() + (b * channels + c) * length;
        const T* src = row + b * length;
        for (std::size_t t = 0; t < length; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + shift;
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(length)) dst[s] += src[t];
        }
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weight) {
  require_rank(input, 3, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  if (weight.dim(1) != input.dim(1)) {
    throw DimensionError("conv1d: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, input has " + std::to_string(input.dim(1)));
  }
  if (weight.dim(2) == 0 || input.dim(2) == 0) {
    throw DimensionError("conv1d: kernel size and series length must be positive");
  }
}

}  // namespace

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  check_conv_shapes(input, weight);
  const std::size_t batch = input.dim(0), length = input.dim(2);
  const std::size_t out_channels = weight.dim(0), kernel = weight.dim(2);
  if (bias.size() != out_channels) {
    throw DimensionError("conv1d: bias has " + std::to_string(bias.size()) + " entries for " +
                         std::to_string(out_channels) + " output channels");
  }
  const RowMatrix<T> col = im2col(input, kernel);
  const auto w = as_matrix(weight, static_cast<Eigen::Index>(out_channels),
                           static_cast<Eigen::Index>(weight.dim(1) * kernel));
  RowMatrix<T> out_mat = w * col;

  Tensor<T> out({batch, out_channels, length});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      const T* src = out_mat.row(static_cast<Eigen::Index>(o)).data() + b * length;
      T* dst = out.raw() + (b * out_channels + o) * length;
      const T shift = bias[o];
      for (std::size_t t = 0; t < length; ++t) dst[t] = src[t] + shift;
    }
  }
  return out;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& grad_output) {
  check_conv_shapes(input, weight);
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  const std::size_t out_channels = weight.dim(0), kernel = weight.dim(2);
  if (grad_output.shape() != Shape{batch, out_channels, length}) {
    throw DimensionError("conv1d_backward: upstream gradient has shape " +
                         shape_string(grad_output.shape()));
  }

  RowMatrix<T> g(static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(batch * length));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      const T* src = grad_output.raw() + (b * out_channels + o) * length;
      std::copy(src, src + length, g.row(static_cast<Eigen::Index>(o)).data() + b * length);
    }
  }

  const RowMatrix<T> col = im2col(input, kernel);
  const auto w = as_matrix(weight, static_cast<Eigen::Index>(out_channels),
                           static_cast<Eigen::Index>(channels * kernel));

  Conv1dGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()),
                       Tensor<T>({out_channels})};
  as_matrix(grads.weight, static_cast<Eigen::Index>(out_channels),
            static_cast<Eigen::Index>(channels * kernel))
      .noalias() = g * col.transpose();
  as_matrix(grads.bias, 1, static_cast<Eigen::Index>(out_channels)) =
      g.rowwise().sum().transpose();

  const RowMatrix<T> grad_col = w.transpose() * g;
  col2im_add(grad_col, kernel, grads.input);
  return grads;
}

template <typename T>
BatchNormState<T> BatchNormState<T>::fresh(std::size_t channels) {
  BatchNormState state;
  state.gamma = Tensor<T>({channels}, T{1});
  state.beta = Tensor<T>({channels}, T{0});
  state.running_mean = Tensor<T>({channels}, T{0});
  state.running_var = Tensor<T>({channels}, T{1});
  return state;
}

template <typename T>
BatchNormResult<T> batchnorm1d(const Tensor<T>& input, const BatchNormState<T>& state) {
  require_rank(input, 3, "batchnorm1d input");
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  if (state.channels() != channels || state.beta.size() != channels ||
      state.running_mean.size() != channels || state.running_var.size() != channels) {
    throw DimensionError("batchnorm1d: state has " + std::to_string(state.channels()) +
                         " channels, input has " + std::to_string(channels));
  }
  const std::size_t count = batch * length;
  const bool training = state.mode == Mode::train;
  if (training && count < 2) {
    throw NumericError("batchnorm1d: degenerate batch, train mode needs B*T >= 2 per channel");
  }

  BatchNormResult<T> result{Tensor<T>(input.shape()), state, {}};
  result.saved.mean.resize(channels);
  result.saved.inv_std.resize(channels);

  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (std::size_t b = 0; b < batch; ++b) {
        const T* x = input.raw() + (b * channels + c) * length;
        for (std::size_t t = 0; t < length; ++t) mean += x[t];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* x = input.raw() + (b * channels + c) * length;
        for (std::size_t t = 0; t < length; ++t) {
          const double d = x[t] - mean;
          var += d * d;
        }
      }
      const double unbiased = var / static_cast<double>(count - 1);
      var /= static_cast<double>(count);
      const double m = state.momentum;
      result.state.running_mean[c] =
          static_cast<T>((1.0 - m) * state.running_mean[c] + m * mean);
      result.state.running_var[c] =
          static_cast<T>((1.0 - m) * state.running_var[c] + m * unbiased);
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + state.epsilon);
    result.saved.mean[c] = mean;
    result.saved.inv_std[c] = inv_std;

    const double scale = state.gamma[c] * inv_std;
    const double shift = state.beta[c] - mean * scale;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* x = input.raw() + (b * channels + c) * length;
      T* y = result.output.raw() + (b * channels + c) * length;
      for (std::size_t t = 0; t < length; ++t) y[t] = static_cast<T>(x[t] * scale + shift);
    }
  }
  return result;
}

template <typename T>
BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>& input, const BatchNormState<T>& state,
                                       const BatchNormSaved& saved,
                                       const Tensor<T>& grad_output) {
  require_rank(input, 3, "batchnorm1d_backward input");
  if (grad_output.shape() != input.shape()) {
    throw DimensionError("batchnorm1d_backward: upstream gradient shape " +
                         shape_string(grad_output.shape()) + " vs input " +
                         shape_string(input.shape()));
  }
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  const double count = static_cast<double>(batch * length);
  BatchNormGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>({channels}), Tensor<T>({channels})};

  for (std::size_t c = 0; c < channels; ++c) {
    const double mean = saved.mean[c], inv_std = saved.inv_std[c];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* x = input.raw() + (b * channels + c) * length;
      const T* dy = grad_output.raw() + (b * channels + c) * length;
      for (std::size_t t = 0; t < length; ++t) {
        sum_dy += dy[t];
        sum_dy_xhat += dy[t] * (x[t] - mean) * inv_std;
      }
    }
    grads.beta[c] = static_cast<T>(sum_dy);
    grads.gamma[c] = static_cast<T>(sum_dy_xhat);

    const double gamma = state.gamma[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const T* x = input.raw() + (b * channels + c) * length;
      const T* dy = grad_output.raw() + (b * channels + c) * length;
      T* dx = grads.input.raw() + (b * channels + c) * length;
      if (state.mode == Mode::train) {
        const double k = gamma * inv_std / count;
        for (std::size_t t = 0; t < length; ++t) {
          const double xhat = (x[t] - mean) * inv_std;
          dx[t] = static_cast<T>(k * (count * dy[t] - sum_dy - xhat * sum_dy_xhat));
        }
      } else {
        for (std::size_t t = 0; t < length; ++t) dx[t] = static_cast<T>(dy[t] * gamma * inv_std);
      }
    }
  }
  return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) {
    throw DimensionError("relu_backward: shape mismatch");
  }
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T{0} ? grad_output[i] : T{0};
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require_rank(input, 3, "global_avg_pool input");
  const std::size_t rows = input.dim(0) * input.dim(1), length = input.dim(2);
  if (length == 0) throw DimensionError("global_avg_pool: empty time axis");
  Tensor<T> out({input.dim(0), input.dim(1)});
  for (std::size_t i = 0; i < rows; ++i) {
    const T* x = input.raw() + i * length;
    double sum = 0.0;
    for (std::size_t t = 0; t < length; ++t) sum += x[t];
    out[i] = static_cast<T>(sum / static_cast<double>(length));
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_output, std::size_t length) {
  require_rank(grad_output, 2, "global_avg_pool_backward upstream");
  if (length == 0) throw DimensionError("global_avg_pool_backward: empty time axis");
  Tensor<T> out({grad_output.dim(0), grad_output.dim(1), length});
  const T inv = T{1} / static_cast<T>(length);
  for (std::size_t i = 0; i < grad_output.size(); ++i) {
    const T g = grad_output[i] * inv;
    std::fill(out.raw() + i * length, out.raw() + (i + 1) * length, g);
  }
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  const auto batch = static_cast<Eigen::Index>(input.dim(0));
  const auto in_dim = static_cast<Eigen::Index>(input.dim(1));
  const auto out_dim = static_cast<Eigen::Index>(weight.dim(0));
  if (static_cast<Eigen::Index>(weight.dim(1)) != in_dim) {
    throw DimensionError("dense: weight expects " + std::to_string(weight.dim(1)) +
                         " inputs, got " + std::to_string(in_dim));
  }
  if (static_cast<Eigen::Index>(bias.size()) != out_dim) {
    throw DimensionError("dense: bias size " + std::to_string(bias.size()) + " vs " +
                         std::to_string(out_dim) + " outputs");
  }
  Tensor<T> out({input.dim(0), weight.dim(0)});
  auto o = as_matrix(out, batch, out_dim);
  o.noalias() = as_matrix(input, batch, in_dim) * as_matrix(weight, out_dim, in_dim).transpose();
  o.rowwise() += as_matrix(bias, 1, out_dim).row(0);
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_output) {
  require_rank(input, 2, "dense_backward input");
  require_rank(weight, 2, "dense_backward weight");
  const auto batch = static_cast<Eigen::Index>(input.dim(0));
  const auto in_dim = static_cast<Eigen::Index>(input.dim(1));
  const auto out_dim = static_cast<Eigen::Index>(weight.dim(0));
  if (grad_output.shape() != Shape{input.dim(0), weight.dim(0)}) {
    throw DimensionError("dense_backward: upstream gradient shape " +
                         shape_string(grad_output.shape()));
  }
  DenseGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()),
                      Tensor<T>({weight.dim(0)})};
  const auto g = as_matrix(grad_output, batch, out_dim);
  as_matrix(grads.input, batch, in_dim).noalias() = g * as_matrix(weight, out_dim, in_dim);
  as_matrix(grads.weight, out_dim, in_dim).noalias() =
      g.transpose() * as_matrix(input, batch, in_dim);
  as_matrix(grads.bias, 1, out_dim) = g.colwise().sum();
  return grads;
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& input, double epsilon) {
  require_rank(input, 2, "l2_normalize_rows input");
  const std::size_t rows = input.dim(0), cols = input.dim(1);
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const T* x = input.raw() + i * cols;
    double sq = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sq += static_cast<double>(x[j]) * x[j];
    const double scale = 1.0 / (std::sqrt(sq) + epsilon);
    T* y = out.raw() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] = static_cast<T>(x[j] * scale);
  }
  return out;
}

template <typename T>
Tensor<T> l2_normalize_rows_backward(const Tensor<T>& input, const Tensor<T>& grad_output,
                                     double epsilon) {
  require_rank(input, 2, "l2_normalize_rows_backward input");
  if (grad_output.shape() != input.shape()) {
    throw DimensionError("l2_normalize_rows_backward: shape mismatch");
  }
  const std::size_t rows = input.dim(0), cols = input.dim(1);
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const T* x = input.raw() + i * cols;
    const T* g = grad_output.raw() + i * cols;
    double sq = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      sq += static_cast<double>(x[j]) * x[j];
      dot += static_cast<double>(x[j]) * g[j];
    }
    const double norm = std::sqrt(sq);
    const double s = norm + epsilon;
    // d(x/s)/dx = I/s - x x^T / (s^2 * norm)
    const double radial = norm > 0.0 ? dot / (s * s * norm) : 0.0;
    T* dx = out.raw() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) dx[j] = static_cast<T>(g[j] / s - x[j] * radial);
  }
  return out;
}

#define RANKSCL_INSTANTIATE_LAYERS(T)                                                         \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, const Tensor<T>&,                  \
                                          const Tensor<T>&);                                   \
  template struct BatchNormState<T>;                                                           \
  template BatchNormResult<T> batchnorm1d(const Tensor<T>&, const BatchNormState<T>&);         \
  template BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>&, const BatchNormState<T>&,  \
                                                  const BatchNormSaved&, const Tensor<T>&);    \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                        \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, std::size_t);                  \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&, double);                              \
  template Tensor<T> l2_normalize_rows_backward(const Tensor<T>&, const Tensor<T>&, double);

RANKSCL_INSTANTIATE_LAYERS(float)
RANKSCL_INSTANTIATE_LAYERS(double)

}  // namespace rankscl
