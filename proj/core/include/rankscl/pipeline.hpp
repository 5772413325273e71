#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rankscl/checkpoint.hpp"
#include "rankscl/dataset.hpp"
#include "rankscl/metrics.hpp"
#include "rankscl/model.hpp"
#include "rankscl/rank_loss.hpp"
#include "rankscl/trainer.hpp"

namespace rankscl {

enum class DataFormat { delimited, jsonl };

struct RunConfig {
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  DataFormat format = DataFormat::delimited;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  std::size_t num_augments = 5;
  std::vector<double> jitter_scales{0.03, 0.05};
  LossNormalization loss_normalization = LossNormalization::mean;
  NegativeDomain negative_domain = NegativeDomain::all;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  EncoderConfig encoder;
  std::filesystem::path output_dir = "rankscl-out";
  std::vector<double> c_grid;  // empty: the default grid
  std::size_t cv_folds = 5;

  TrainOptions train_options() const;
};

using Setting = std::pair<std::string, std::string>;

// Keys are the kebab-case flag names (underscores are accepted too):
// train, test, format, epochs, batch-size, learning-rate, weight-decay,
// num-augments, jitter-scales, loss-normalization, negative-domain, seeds,
// conv-channels, kernel-sizes, repr-dim, repr-mode, output-dir, c-grid,
// cv-folds. Lists are comma separated. Throws ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// "key = value" lines, '#' starts a comment. Throws ConfigError.
std::vector<Setting> read_config_file(const std::filesystem::path& path);

// defaults <- file settings <- flag settings
RunConfig resolve_config(const std::vector<Setting>& file_settings,
                         const std::vector<Setting>& flag_settings);

// Loads one split; `labels` pins the mapping for a test split.
TimeSeriesDataset load_dataset(const std::filesystem::path& path, DataFormat format,
                               const LabelMap* labels = nullptr);

// Header "N D", then N rows of D space-separated shortest round-trip floats.
void write_representations(const Tensor<float>& reps, const std::filesystem::path& path);
Tensor<float> read_representations(const std::filesystem::path& path);

// One original label token per line.
void write_labels(const std::vector<std::string>& labels, const std::filesystem::path& path);
std::vector<std::string> read_labels(const std::filesystem::path& path);

// Normalizes + cleans the training split, trains, writes `model.rscl` and
// `train_log.txt` ("epoch mean_loss seconds") into `out_dir`.
TrainResult cmd_train(const RunConfig& config, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

// Eval-mode representations r of every series in `data`, normalized with the
// statistics stored in the checkpoint. The feature count is checked before
// anything is written.
Tensor<float> encode_series(const Checkpoint& checkpoint, const TimeSeriesDataset& data);

// Writes `output` and, when given, the original label tokens to `labels_output`.
void cmd_encode(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                DataFormat format, const std::filesystem::path& output,
                const std::optional<std::filesystem::path>& labels_output = std::nullopt);

// SVM selection on the train representations, prediction on the test ones.
MetricsReport evaluate_representations(const Tensor<float>& train_reps,
                                       const std::vector<std::string>& train_labels,
                                       const Tensor<float>& test_reps,
                                       const std::vector<std::string>& test_labels,
                                       const RunConfig& config);

MetricsReport cmd_evaluate(const std::filesystem::path& train_reps,
                           const std::filesystem::path& train_labels,
                           const std::filesystem::path& test_reps,
                           const std::filesystem::path& test_labels, const RunConfig& config,
                           const std::optional<std::filesystem::path>& output = std::nullopt);

// train -> encode -> evaluate for every seed in config.seeds, artifacts under
// output_dir/seed-<s>/, aggregate written to output_dir/metrics.json.
MetricsReport cmd_pipeline(const RunConfig& config);

}  // namespace rankscl
