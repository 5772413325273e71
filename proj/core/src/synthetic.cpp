#include "rankscl/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rankscl/errors.hpp"
#include "rankscl/rng.hpp"

namespace rankscl {
namespace {

LabelMap numbered_labels(std::size_t count, int first) {
  LabelMap map;
  for (std::size_t c = 0; c < count; ++c) map.names.push_back(std::to_string(first + static_cast<int>(c)));
  return map;
}

void control_chart(std::size_t pattern, std::size_t length, Rng& rng, float* out) {
  const double base = 30.0, spread = 2.0;
  const double n = static_cast<double>(length);
  double amplitude = 0.0, period = 1.0, gradient = 0.0, shift = 0.0, onset = 0.0;
  switch (pattern) {
    case 1:
      amplitude = rng.uniform(10.0, 15.0);
      period = rng.uniform(10.0, 15.0);
      break;
    case 2:
    case 3:
      gradient = rng.uniform(0.2, 0.5);
      break;
    case 4:
    case 5:
      shift = rng.uniform(7.5, 20.0);
      onset = rng.uniform(n / 3.0, 2.0 * n / 3.0);
      break;
    default:
      break;
  }
  for (std::size_t t = 0; t < length; ++t) {
    const double time = static_cast<double>(t + 1);
    double v = base + spread * rng.uniform(-3.0, 3.0);
    switch (pattern) {
      case 1: v += amplitude * std::sin(2.0 * std::numbers::pi * time / period); break;
      case 2: v += gradient * time; break;
      case 3: v -= gradient * time; break;
      case 4: v += time >= onset ? shift : 0.0; break;
      case 5: v -= time >= onset ? shift : 0.0; break;
      default: break;
    }
    out[t] = static_cast<float>(v);
  }
}

}  // namespace

TimeSeriesDataset make_sines(const SineSpec& spec, std::uint64_t seed) {
  if (spec.frequencies.empty() || spec.length == 0 || spec.per_class == 0) {
    throw ContractError("make_sines: empty specification");
  }
  Rng rng(seed);
  const std::size_t classes = spec.frequencies.size();
  const std::size_t n = classes * spec.per_class;
  TimeSeriesDataset ds;
  ds.x = Tensor<float>({n, spec.length, 1});
  ds.label_map = numbered_labels(classes, 0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < spec.per_class; ++k, ++row) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t t = 0; t < spec.length; ++t) {
        const double u = static_cast<double>(t) / static_cast<double>(spec.length);
        const double v = std::sin(2.0 * std::numbers::pi * spec.frequencies[c] * u + phase) +
                         spec.noise * rng.normal();
        ds.x(row, t, 0) = static_cast<float>(v);
      }
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

TimeSeriesDataset make_control_charts(std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw ContractError("make_control_charts: per_class must be > 0");
  constexpr std::size_t kPatterns = 6, kLength = 60;
  Rng rng(seed);
  TimeSeriesDataset ds;
  ds.x = Tensor<float>({kPatterns * per_class, kLength, 1});
  ds.label_map = numbered_labels(kPatterns, 1);
  std::size_t row = 0;
  for (std::size_t p = 0; p < kPatterns; ++p) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      control_chart(p, kLength, rng, ds.x.raw() + row * kLength);
      ds.labels.push_back(static_cast<int>(p));
    }
  }
  return ds;
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> make_control_chart_split(std::uint64_t seed) {
  return {make_control_charts(50, seed), make_control_charts(50, seed ^ 0x9e3779b97f4a7c15ULL)};
}

}  // namespace rankscl
