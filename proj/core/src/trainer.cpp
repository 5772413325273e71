#include "rankscl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "rankscl/errors.hpp"

namespace rankscl {

template <typename T>
BatchGradients<T> batch_gradients(const ModelState<T>& model, const Tensor<T>& x,
                                  const std::vector<int>& labels, const AugmentConfig& augment,
                                  const RankLossConfig& loss, Rng& rng, Mode mode) {
  if (labels.size() != x.dim(0)) throw DimensionError("batch_gradients: one label per row required");
  BatchGradients<T> out;
  out.trace = forward(model, x, mode);
  const EmbeddingBatch<T> expanded = expand_batch(out.trace.z, labels, augment, rng);
  const RankComputation<T> rc = rank_loss(expanded.z, expanded.labels, loss);
  out.loss = rc.loss;
  out.num_pairs = rc.num_pairs;
  const Tensor<T> grad_z = expand_batch_backward(expanded, rc.grad_z, x.dim(0));
  out.grads = backward(model, out.trace, grad_z);
  return out;
}

template <typename T>
double batch_loss(const ModelState<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
                  const AugmentConfig& augment, const RankLossConfig& loss, Rng& rng, Mode mode) {
  if (labels.size() != x.dim(0)) throw DimensionError("batch_loss: one label per row required");
  const ForwardTrace<T> trace = forward(model, x, mode);
  const EmbeddingBatch<T> expanded = expand_batch(trace.z, labels, augment, rng);
  return rank_loss(expanded.z, expanded.labels, loss).loss;
}

TrainResult train_encoder(const TimeSeriesDataset& train, const TrainOptions& options,
                          std::uint64_t seed, const std::function<void(const EpochLog&)>& on_epoch) {
  options.encoder.validate();
  options.augment.validate();
  if (train.size() == 0) throw ContractError("training set is empty");
  if (options.epochs == 0) throw ConfigError("epochs must be >= 1");

  TrainResult result{init_model<float>(options.encoder, seed, options.adam), {}};
  ModelState<float>& model = result.model;
  check_input_features(model, train.features());

  const BatchPlan plan{options.batch_size, seed, false};
  std::uint64_t global_batch = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto plan_batches = batches(train.size(), plan, epoch);
    double total = 0.0;
    for (std::size_t b = 0; b < plan_batches.size(); ++b, ++global_batch) {
      const Tensor<float> x = gather_batch(train, plan_batches[b]);
      const std::vector<int> labels = gather_labels(train, plan_batches[b]);
      Rng rng(seed, Stream::augment, global_batch);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b);
      try {
        BatchGradients<float> bg =
            batch_gradients(model, x, labels, options.augment, options.loss, rng, Mode::train);
        if (!std::isfinite(bg.loss)) throw NumericError("loss is not finite");
        commit_batchnorm(model, bg.trace);
        apply_gradients(model, bg.grads);
        total += bg.loss;
      } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = total / static_cast<double>(plan_batches.size());
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  model.set_mode(Mode::eval);
  return result;
}

#define RANKSCL_INSTANTIATE(T)                                                                    \
  template BatchGradients<T> batch_gradients(const ModelState<T>&, const Tensor<T>&,             \
                                             const std::vector<int>&, const AugmentConfig&,       \
                                             const RankLossConfig&, Rng&, Mode);                 \
  template double batch_loss(const ModelState<T>&, const Tensor<T>&, const std::vector<int>&,    \
                             const AugmentConfig&, const RankLossConfig&, Rng&, Mode);

RANKSCL_INSTANTIATE(float)
RANKSCL_INSTANTIATE(double)

#undef RANKSCL_INSTANTIATE

}  // namespace rankscl
