#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "rankscl/augment.hpp"
#include "rankscl/dataset.hpp"
#include "rankscl/model.hpp"
#include "rankscl/rank_loss.hpp"
#include "rankscl/rng.hpp"

namespace rankscl {

struct TrainOptions {
  EncoderConfig encoder;
  AdamHyper adam;
  AugmentConfig augment;
  RankLossConfig loss;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
};

// Loss and parameter gradients of one batch:
// encode -> project -> expand_batch -> normalize -> distances -> rank loss.
template <typename T>
struct BatchGradients {
  double loss = 0.0;
  std::size_t num_pairs = 0;
  ParameterGrads<T> grads;
  ForwardTrace<T> trace;
};

template <typename T>
BatchGradients<T> batch_gradients(const ModelState<T>& model, const Tensor<T>& x,
                                  const std::vector<int>& labels, const AugmentConfig& augment,
                                  const RankLossConfig& loss, Rng& rng, Mode mode = Mode::train);

// Forward-only loss for the same pipeline (no gradients, no state updates).
template <typename T>
double batch_loss(const ModelState<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
                  const AugmentConfig& augment, const RankLossConfig& loss, Rng& rng,
                  Mode mode = Mode::train);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelState<float> model;
  std::vector<EpochLog> log;
};

// Trains from a fresh init_model(options.encoder, seed). The dataset must be
// normalized and cleaned. Shuffle and augmentation streams derive from `seed`
// (see rng.hpp); the augmentation stream index is the global batch counter.
// Throws NumericError naming epoch and batch when the loss turns non-finite.
TrainResult train_encoder(const TimeSeriesDataset& train, const TrainOptions& options,
                          std::uint64_t seed,
                          const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace rankscl
