#include <benchmark/benchmark.h>

#include <random>

#include "rankscl/layers.hpp"
#include "rankscl/model.hpp"
#include "rankscl/rank_loss.hpp"
#include "rankscl/svm.hpp"

namespace rankscl {
namespace {

template <typename T>
Tensor<T> noise(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(gen));
  return t;
}

// Second conv block of the default encoder: 128 -> 256 channels, K = 5.
void BM_Conv1dForward(benchmark::State& state) {
  const auto x = noise<float>({64, 128, 128}, 1);
  const auto w = noise<float>({256, 128, 5}, 2);
  const auto b = noise<float>({256}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, b));
}
BENCHMARK(BM_Conv1dForward)->Unit(benchmark::kMillisecond);

void BM_Conv1dBackward(benchmark::State& state) {
  const auto x = noise<float>({64, 128, 128}, 1);
  const auto w = noise<float>({256, 128, 5}, 2);
  const auto up = noise<float>({64, 256, 128}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_backward(x, w, up));
}
BENCHMARK(BM_Conv1dBackward)->Unit(benchmark::kMillisecond);

// Batch 128 with 5 jittered copies: 768 embeddings of dimension 320.
void BM_RankLoss(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  auto z = l2_normalize_rows(noise<float>({rows, 320}, 4));
  std::vector<int> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) labels[i] = static_cast<int>(i % 6);
  for (auto _ : state) benchmark::DoNotOptimize(rank_loss(z, labels));
}
BENCHMARK(BM_RankLoss)->Arg(128)->Arg(768)->Unit(benchmark::kMillisecond);

void BM_EncodeEval(benchmark::State& state) {
  const auto model = init_model<float>(EncoderConfig{}, 0);
  const auto x = noise<float>({64, 1, 128}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(encode_eval(model, x));
}
BENCHMARK(BM_EncodeEval)->Unit(benchmark::kMillisecond);

void BM_SvmFitOvr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = noise<double>({n, 320}, 6);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 6);
  const double gamma = default_gamma(x);
  for (auto _ : state) benchmark::DoNotOptimize(svm_fit_ovr(x, labels, 1.0, gamma));
}
BENCHMARK(BM_SvmFitOvr)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rankscl

BENCHMARK_MAIN();
