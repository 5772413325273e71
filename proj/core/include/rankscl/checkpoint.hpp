#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "rankscl/dataset.hpp"
#include "rankscl/model.hpp"

namespace rankscl {

// Layout (all integers little-endian):
//   "RSCL" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
//   | f32 payload
// The metadata lists architecture, hyperparameters and the tensor order
// (name + shape); the payload is those tensors concatenated in that order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelState<float> model;
  // Training-split statistics, re-applied when encoding new data.
  std::optional<NormStats> normalization;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
void save_checkpoint(const ModelState<float>& model, const std::filesystem::path& path);

// Validates everything before returning; throws CheckpointError naming the
// offending field.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rankscl
