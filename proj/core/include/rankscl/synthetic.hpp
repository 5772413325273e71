#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "rankscl/dataset.hpp"

namespace rankscl {

struct SineSpec {
  std::vector<double> frequencies{1.0, 2.0, 4.0};  // cycles over the unit interval
  std::size_t length = 64;
  std::size_t per_class = 20;
  double noise = 0.1;
};

// Unit-amplitude sines with a uniform random phase plus Gaussian noise,
// one class per frequency. Labels are "0", "1", ...
TimeSeriesDataset make_sines(const SineSpec& spec, std::uint64_t seed);

// Control-chart patterns (normal, cyclic, increasing, decreasing, upward
// shift, downward shift; labels "1".."6") of length 60, generated with the
// classic synthetic-control recipe: base 30 + 2 * U(-3, 3) noise per step.
TimeSeriesDataset make_control_charts(std::size_t per_class, std::uint64_t seed);

// Train/test pair with the class layout of the SyntheticControl archive
// split: 50 + 50 series per class.
std::pair<TimeSeriesDataset, TimeSeriesDataset> make_control_chart_split(std::uint64_t seed);

}  // namespace rankscl
