#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rankscl/tensor.hpp"

namespace rankscl {

// Original label tokens; position = contiguous class id.
struct LabelMap {
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
  std::optional<int> find(const std::string& name) const;

  // Distinct tokens sorted numerically when every token parses as a number,
  // lexicographically otherwise.
  static LabelMap from_tokens(const std::vector<std::string>& tokens);
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// One (mean, std) pair for univariate data, one per variable otherwise.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct TimeSeriesDataset {
  Tensor<float> x;  // [N, T, F]
  std::vector<int> labels;
  LabelMap label_map;
  std::optional<NormStats> norm_stats;

  std::size_t size() const { return x.empty() ? 0 : x.dim(0); }
  std::size_t length() const { return x.empty() ? 0 : x.dim(1); }
  std::size_t features() const { return x.empty() ? 0 : x.dim(2); }
  std::size_t num_classes() const { return label_map.size(); }
  std::vector<std::string> label_names() const;
};

enum class Delimiter { auto_detect, tab, comma };

// UCR-style file: label then T values per line; "NaN" (any case) marks a
// missing value. `labels` fixes the label mapping (e.g. the training
// split's) - unseen tokens are then a FormatError.
TimeSeriesDataset load_delimited(const std::filesystem::path& path,
                                 Delimiter delimiter = Delimiter::auto_detect,
                                 const LabelMap* labels = nullptr);

// One JSON object per line: {"label": <string|number>, "series": [[T values] x F]}.
// Missing values are null or the string "NaN".
TimeSeriesDataset load_multivariate_jsonl(const std::filesystem::path& path,
                                          const LabelMap* labels = nullptr);

void save_delimited(const TimeSeriesDataset& dataset, const std::filesystem::path& path,
                    char delimiter = '\t');
void save_multivariate_jsonl(const TimeSeriesDataset& dataset, const std::filesystem::path& path);

// Statistics over all non-NaN values (F == 1) or per variable (F > 1),
// population standard deviation.
NormStats fit_norm_stats(const TimeSeriesDataset& dataset);

// x <- (x - mean) / max(std, 1e-8); records `stats` on the result.
TimeSeriesDataset apply_norm_stats(const TimeSeriesDataset& dataset, const NormStats& stats);

// Fits on `dataset` (the training split) and applies.
TimeSeriesDataset znormalize(const TimeSeriesDataset& dataset);

// NaN -> 0. Run after normalization, so 0 is the training mean.
TimeSeriesDataset clean_missing(const TimeSeriesDataset& dataset);

struct BatchPlan {
  std::size_t batch_size = 128;
  std::uint64_t rng_seed = 0;
  bool drop_last = false;
};

// Shuffled index batches for one epoch; the shuffle stream is derived from
// rng_seed XOR epoch. batch_size is capped at n.
std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan,
                                              std::uint64_t epoch);

// Gathers rows into an encoder batch [B, F, T].
Tensor<float> gather_batch(const TimeSeriesDataset& dataset, const std::vector<std::size_t>& indices);
std::vector<int> gather_labels(const TimeSeriesDataset& dataset,
                               const std::vector<std::size_t>& indices);

// The whole dataset as [N, F, T].
Tensor<float> to_channels_first(const TimeSeriesDataset& dataset);

}  // namespace rankscl
