#include "rankscl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankscl/errors.hpp"
#include "rankscl/rng.hpp"

namespace rankscl {

void EncoderConfig::validate() const {
  if (in_features == 0) throw ConfigError("encoder: in_features must be >= 1");
  if (conv_channels.empty()) throw ConfigError("encoder: at least one conv block is required");
  if (conv_channels.size() != kernel_sizes.size()) {
    throw ConfigError("encoder: conv_channels has " + std::to_string(conv_channels.size()) +
                      " entries but kernel_sizes has " + std::to_string(kernel_sizes.size()));
  }
  for (std::size_t c : conv_channels) {
    if (c == 0) throw ConfigError("encoder: conv channel counts must be >= 1");
  }
  for (std::size_t k : kernel_sizes) {
    if (k == 0) throw ConfigError("encoder: kernel sizes must be >= 1");
  }
  if (dense_repr && repr_dim == 0) throw ConfigError("encoder: repr_dim must be >= 1");
}

std::size_t EncoderConfig::representation_dim() const {
  return dense_repr ? repr_dim : conv_channels.back();
}

template <typename T>
std::vector<NamedTensor<T>> ModelState<T>::parameters() {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string idx = std::to_string(i);
    out.push_back({"conv" + idx + ".weight", &blocks[i].weight});
    out.push_back({"conv" + idx + ".bias", &blocks[i].bias});
    out.push_back({"bn" + idx + ".gamma", &blocks[i].bn.gamma});
    out.push_back({"bn" + idx + ".beta", &blocks[i].bn.beta});
  }
  if (config.dense_repr) {
    out.push_back({"fc.weight", &fc_weight});
    out.push_back({"fc.bias", &fc_bias});
  }
  out.push_back({"head1.weight", &head1_weight});
  out.push_back({"head1.bias", &head1_bias});
  out.push_back({"head2.weight", &head2_weight});
  out.push_back({"head2.bias", &head2_bias});
  return out;
}

template <typename T>
std::vector<NamedConstTensor<T>> ModelState<T>::parameters() const {
  std::vector<NamedConstTensor<T>> out;
  for (auto& p : const_cast<ModelState*>(this)->parameters()) out.push_back({p.name, p.tensor});
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> ModelState<T>::buffers() {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string idx = std::to_string(i);
    out.push_back({"bn" + idx + ".running_mean", &blocks[i].bn.running_mean});
    out.push_back({"bn" + idx + ".running_var", &blocks[i].bn.running_var});
  }
  return out;
}

template <typename T>
std::vector<NamedConstTensor<T>> ModelState<T>::buffers() const {
  std::vector<NamedConstTensor<T>> out;
  for (auto& p : const_cast<ModelState*>(this)->buffers()) out.push_back({p.name, p.tensor});
  return out;
}

template <typename T>
std::size_t ModelState<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor->size();
  return total;
}

template <typename T>
void ModelState<T>::set_mode(Mode mode) {
  for (auto& block : blocks) block.bn.mode = mode;
}

template <typename T>
void ModelState<T>::set_adam_hyper(const AdamHyper& hyper) {
  for (auto& state : adam) state.hyper = hyper;
}

namespace {

template <typename U, typename T>
Tensor<U> convert(const Tensor<T>& t) {
  return t.template cast<U>();
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
template <typename U>
ModelState<U> ModelState<T>::cast() const {
  ModelState<U> out;
  out.config = config;
  out.rng_seed = rng_seed;
  for (const auto& block : blocks) {
    ConvBlock<U> b;
    b.weight = convert<U>(block.weight);
    b.bias = convert<U>(block.bias);
    b.bn.gamma = convert<U>(block.bn.gamma);
    b.bn.beta = convert<U>(block.bn.beta);
    b.bn.running_mean = convert<U>(block.bn.running_mean);
    b.bn.running_var = convert<U>(block.bn.running_var);
    b.bn.momentum = block.bn.momentum;
    b.bn.epsilon = block.bn.epsilon;
    b.bn.mode = block.bn.mode;
    out.blocks.push_back(std::move(b));
  }
  out.fc_weight = convert<U>(fc_weight);
  out.fc_bias = convert<U>(fc_bias);
  out.head1_weight = convert<U>(head1_weight);
  out.head1_bias = convert<U>(head1_bias);
  out.head2_weight = convert<U>(head2_weight);
  out.head2_bias = convert<U>(head2_bias);
  for (const auto& state : adam) {
    AdamState<U> s;
    s.step_count = state.step_count;
    s.m = convert<U>(state.m);
    s.v = convert<U>(state.v);
    s.hyper = state.hyper;
    out.adam.push_back(std::move(s));
  }
  return out;
}

template <typename T>
ModelState<T> init_model(const EncoderConfig& config, std::uint64_t seed, const AdamHyper& hyper) {
  config.validate();
  ModelState<T> model;
  model.config = config;
  model.rng_seed = seed;
  Rng rng(seed, Stream::init, 0);

  std::size_t in_channels = config.in_features;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    const std::size_t out_channels = config.conv_channels[i];
    const std::size_t kernel = config.kernel_sizes[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
    ConvBlock<T> block;
    block.weight = uniform_tensor<T>({out_channels, in_channels, kernel}, bound, rng);
    block.bias = uniform_tensor<T>({out_channels}, bound, rng);
    block.bn = BatchNormState<T>::fresh(out_channels);
    model.blocks.push_back(std::move(block));
    in_channels = out_channels;
  }

  const std::size_t dim = config.representation_dim();
  if (config.dense_repr) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels));
    model.fc_weight = uniform_tensor<T>({dim, in_channels}, bound, rng);
    model.fc_bias = uniform_tensor<T>({dim}, bound, rng);
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(dim));
  model.head1_weight = uniform_tensor<T>({dim, dim}, head_bound, rng);
  model.head1_bias = uniform_tensor<T>({dim}, head_bound, rng);
  model.head2_weight = uniform_tensor<T>({dim, dim}, head_bound, rng);
  model.head2_bias = uniform_tensor<T>({dim}, head_bound, rng);

  for (const auto& p : model.parameters()) {
    model.adam.push_back(AdamState<T>::zeros_like(*p.tensor, hyper));
  }
  return model;
}

template <typename T>
void check_input_features(const ModelState<T>& model, std::size_t features) {
  if (features != model.config.in_features) {
    throw DimensionError("model expects " + std::to_string(model.config.in_features) +
                         " input variables, data has " + std::to_string(features));
  }
}

namespace {

template <typename T>
void check_batch(const ModelState<T>& model, const Tensor<T>& x) {
  require_rank(x, 3, "encoder input [B, F, T]");
  check_input_features(model, x.dim(1));
  if (x.dim(2) == 0) throw DimensionError("encoder input has an empty time axis");
  if (!x.all_finite()) {
    throw NumericError("encoder input contains NaN/Inf; clean missing values first");
  }
}

template <typename T>
void run_encoder(const ModelState<T>& model, const Tensor<T>& x, Mode mode,
                 ForwardTrace<T>& trace) {
  check_batch(model, x);
  trace.mode = mode;
  trace.blocks.clear();
  Tensor<T> act = x;
  for (const auto& block : model.blocks) {
    BlockTrace<T> bt;
    bt.conv_out = conv1d(act, block.weight, block.bias);
    BatchNormState<T> bn = block.bn;
    bn.mode = mode;
    bt.bn = batchnorm1d(bt.conv_out, bn);
    bt.input = std::move(act);
    act = relu(bt.bn.output);
    trace.blocks.push_back(std::move(bt));
  }
  trace.pooled = global_avg_pool(act);
  trace.last_activation = std::move(act);
  trace.r = model.config.dense_repr ? dense(trace.pooled, model.fc_weight, model.fc_bias)
                                    : trace.pooled;
}

template <typename T>
void run_head(const ModelState<T>& model, ForwardTrace<T>& trace) {
  trace.head_hidden = dense(trace.r, model.head1_weight, model.head1_bias);
  trace.head_out = dense(relu(trace.head_hidden), model.head2_weight, model.head2_bias);
  trace.z = l2_normalize_rows(trace.head_out);
}

}  // namespace

template <typename T>
ForwardTrace<T> forward(const ModelState<T>& model, const Tensor<T>& x, Mode mode) {
  ForwardTrace<T> trace;
  run_encoder(model, x, mode, trace);
  run_head(model, trace);
  return trace;
}

template <typename T>
ParameterGrads<T> backward(const ModelState<T>& model, const ForwardTrace<T>& trace,
                           const Tensor<T>& grad_z, const Tensor<T>& grad_r) {
  const std::size_t dim = model.config.representation_dim();
  Tensor<T> head1_w(model.head1_weight.shape()), head1_b(model.head1_bias.shape());
  Tensor<T> head2_w(model.head2_weight.shape()), head2_b(model.head2_bias.shape());
  Tensor<T> g_r({trace.r.dim(0), dim});

  if (!grad_z.empty()) {
    const Tensor<T> g_out = l2_normalize_rows_backward(trace.head_out, grad_z);
    auto d2 = dense_backward(relu(trace.head_hidden), model.head2_weight, g_out);
    const Tensor<T> g_hidden = relu_backward(trace.head_hidden, d2.input);
    auto d1 = dense_backward(trace.r, model.head1_weight, g_hidden);
    head2_w = std::move(d2.weight);
    head2_b = std::move(d2.bias);
    head1_w = std::move(d1.weight);
    head1_b = std::move(d1.bias);
    g_r = std::move(d1.input);
  }
  if (!grad_r.empty()) {
    if (grad_r.shape() != g_r.shape()) {
      throw DimensionError("backward: grad_r shape " + shape_string(grad_r.shape()));
    }
    for (std::size_t i = 0; i < g_r.size(); ++i) g_r[i] += grad_r[i];
  }

  Tensor<T> fc_w, fc_b, g_pooled;
  if (model.config.dense_repr) {
    auto dfc = dense_backward(trace.pooled, model.fc_weight, g_r);
    fc_w = std::move(dfc.weight);
    fc_b = std::move(dfc.bias);
    g_pooled = std::move(dfc.input);
  } else {
    g_pooled = std::move(g_r);
  }

  Tensor<T> g_act = global_avg_pool_backward(g_pooled, trace.last_activation.dim(2));
  std::vector<Tensor<T>> block_grads(4 * model.blocks.size());
  for (std::size_t i = model.blocks.size(); i-- > 0;) {
    const auto& bt = trace.blocks[i];
    const Tensor<T> g_bn = relu_backward(bt.bn.output, g_act);
    auto dbn = batchnorm1d_backward(bt.conv_out, bt.bn.state, bt.bn.saved, g_bn);
    auto dconv = conv1d_backward(bt.input, model.blocks[i].weight, dbn.input);
    block_grads[4 * i + 0] = std::move(dconv.weight);
    block_grads[4 * i + 1] = std::move(dconv.bias);
    block_grads[4 * i + 2] = std::move(dbn.gamma);
    block_grads[4 * i + 3] = std::move(dbn.beta);
    g_act = std::move(dconv.input);
  }

  ParameterGrads<T> grads = std::move(block_grads);
  if (model.config.dense_repr) {
    grads.push_back(std::move(fc_w));
    grads.push_back(std::move(fc_b));
  }
  grads.push_back(std::move(head1_w));
  grads.push_back(std::move(head1_b));
  grads.push_back(std::move(head2_w));
  grads.push_back(std::move(head2_b));
  return grads;
}

template <typename T>
void commit_batchnorm(ModelState<T>& model, const ForwardTrace<T>& trace) {
  if (trace.mode != Mode::train) return;
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    model.blocks[i].bn.running_mean = trace.blocks[i].bn.state.running_mean;
    model.blocks[i].bn.running_var = trace.blocks[i].bn.state.running_var;
  }
}

template <typename T>
Tensor<T> encode(ModelState<T>& model, const Tensor<T>& x, Mode mode) {
  ForwardTrace<T> trace;
  run_encoder(model, x, mode, trace);
  commit_batchnorm(model, trace);
  return std::move(trace.r);
}

template <typename T>
Tensor<T> encode_eval(const ModelState<T>& model, const Tensor<T>& x, std::size_t batch_size) {
  require_rank(x, 3, "encoder input [B, F, T]");
  const std::size_t n = x.dim(0), features = x.dim(1), length = x.dim(2);
  const std::size_t dim = model.config.representation_dim();
  batch_size = std::max<std::size_t>(batch_size, 1);
  Tensor<T> out({n, dim});
  const std::size_t row = features * length;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    Tensor<T> chunk({count, features, length});
    std::copy(x.raw() + start * row, x.raw() + (start + count) * row, chunk.raw());
    ForwardTrace<T> trace;
    run_encoder(model, chunk, Mode::eval, trace);
    std::copy(trace.r.raw(), trace.r.raw() + trace.r.size(), out.raw() + start * dim);
  }
  return out;
}

template <typename T>
Tensor<T> project(const ModelState<T>& model, const Tensor<T>& r) {
  ForwardTrace<T> trace;
  trace.r = r;
  run_head(model, trace);
  return std::move(trace.z);
}

template <typename T>
void apply_gradients(ModelState<T>& model, const ParameterGrads<T>& grads) {
  auto params = model.parameters();
  if (grads.size() != params.size() || model.adam.size() != params.size()) {
    throw DimensionError("apply_gradients: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto result = adam_step(*params[i].tensor, grads[i], model.adam[i], params[i].name);
    *params[i].tensor = std::move(result.param);
    model.adam[i] = std::move(result.state);
  }
}

#define RANKSCL_INSTANTIATE_MODEL(T)                                                          \
  template struct ModelState<T>;                                                              \
  template ModelState<T> init_model<T>(const EncoderConfig&, std::uint64_t, const AdamHyper&); \
  template void check_input_features(const ModelState<T>&, std::size_t);                      \
  template ForwardTrace<T> forward(const ModelState<T>&, const Tensor<T>&, Mode);             \
  template ParameterGrads<T> backward(const ModelState<T>&, const ForwardTrace<T>&,           \
                                      const Tensor<T>&, const Tensor<T>&);                    \
  template void commit_batchnorm(ModelState<T>&, const ForwardTrace<T>&);                     \
  template Tensor<T> encode(ModelState<T>&, const Tensor<T>&, Mode);                          \
  template Tensor<T> encode_eval(const ModelState<T>&, const Tensor<T>&, std::size_t);        \
  template Tensor<T> project(const ModelState<T>&, const Tensor<T>&);                         \
  template void apply_gradients(ModelState<T>&, const ParameterGrads<T>&);

RANKSCL_INSTANTIATE_MODEL(float)
RANKSCL_INSTANTIATE_MODEL(double)

template ModelState<double> ModelState<float>::cast<double>() const;
template ModelState<float> ModelState<double>::cast<float>() const;
template ModelState<float> ModelState<float>::cast<float>() const;

}  // namespace rankscl
