#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "rankscl/errors.hpp"
#include "rankscl/model.hpp"
#include "support.hpp"

namespace rankscl {
namespace {

using testing::random_tensor;

// Independent count from the layer shapes of the default architecture.
std::size_t closed_form_parameter_count(const EncoderConfig& c) {
  std::size_t total = 0, in = c.in_features;
  for (std::size_t i = 0; i < c.conv_channels.size(); ++i) {
    const std::size_t out = c.conv_channels[i];
    total += out * in * c.kernel_sizes[i] + out;  // conv weight + bias
    total += 2 * out;                             // bn gamma + beta
    in = out;
  }
  const std::size_t d = c.repr_dim;
  total += d * in + d;      // fc
  total += 2 * (d * d + d);  // two head layers
  return total;
}

TEST(Model, DefaultParameterCount) {
  const EncoderConfig config;
  const auto model = init_model<float>(config, 0);
  EXPECT_EQ(model.parameter_count(), closed_form_parameter_count(config));
  EXPECT_EQ(model.parameter_count(), 511424u);
}

TEST(Model, InitIsDeterministicPerSeed) {
  const auto a = init_model<float>(EncoderConfig{}, 7);
  const auto b = init_model<float>(EncoderConfig{}, 7);
  const auto c = init_model<float>(EncoderConfig{}, 8);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(bitwise_equal(*pa[i].tensor, *pb[i].tensor)) << pa[i].name;
    any_diff = any_diff || !(*pa[i].tensor == *pc[i].tensor);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, InitialStateConventions) {
  const auto m = init_model<double>(testing::tiny_encoder(), 3);
  for (const auto& block : m.blocks) {
    for (double g : block.bn.gamma.values()) EXPECT_EQ(g, 1.0);
    for (double b : block.bn.beta.values()) EXPECT_EQ(b, 0.0);
  }
  for (const auto& s : m.adam) {
    EXPECT_EQ(s.step_count, 0u);
    for (double v : s.m.values()) EXPECT_EQ(v, 0.0);
  }
  // Fan-in bound of the first conv layer: 1 / sqrt(1 * 8).
  for (double w : m.blocks[0].weight.values()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(8.0));
}

TEST(Model, ParameterNamesAndOrder) {
  const auto m = init_model<float>(testing::tiny_encoder(), 0);
  std::vector<std::string> names;
  for (const auto& p : m.parameters()) names.push_back(p.name);
  ASSERT_EQ(names.size(), 18u);
  EXPECT_EQ(names[0], "conv0.weight");
  EXPECT_EQ(names[3], "bn0.beta");
  EXPECT_EQ(names[12], "fc.weight");
  EXPECT_EQ(names[17], "head2.bias");
  EXPECT_EQ(m.buffers().size(), 6u);
}

TEST(Model, EncodeShapeAndEvalDeterminism) {
  auto m = init_model<float>(EncoderConfig{}, 1);
  std::mt19937_64 gen(2);
  const auto x = random_tensor({4, 1, 30}, gen).cast<float>();
  const auto r1 = encode(m, x, Mode::eval);
  const auto r2 = encode(m, x, Mode::eval);
  EXPECT_EQ(r1.shape(), (Shape{4, 320}));
  EXPECT_TRUE(bitwise_equal(r1, r2));
  EXPECT_TRUE(bitwise_equal(r1, encode_eval(m, x)));
}

TEST(Model, TrainModeEncodeUpdatesRunningStatistics) {
  auto m = init_model<double>(testing::tiny_encoder(), 1);
  std::mt19937_64 gen(3);
  const auto before = m.blocks[0].bn.running_mean;
  encode(m, random_tensor({5, 1, 16}, gen), Mode::train);
  EXPECT_FALSE(before == m.blocks[0].bn.running_mean);
}

TEST(Model, ZeroInputGivesFiniteOutput) {
  auto m = init_model<float>(EncoderConfig{}, 1);
  EXPECT_TRUE(encode(m, Tensor<float>({3, 1, 20}, 0.0f), Mode::eval).all_finite());
}

TEST(Model, InputValidation) {
  auto m = init_model<float>(EncoderConfig{}, 1);
  Tensor<float> x({2, 1, 10}, 0.0f);
  x[3] = std::nanf("");
  EXPECT_THROW(encode(m, x, Mode::eval), NumericError);
  EXPECT_THROW(encode(m, Tensor<float>({2, 3, 10}), Mode::eval), DimensionError);
  EXPECT_THROW(check_input_features(m, 2), DimensionError);
}

TEST(Model, ShortSeriesArePadded) {
  auto m = init_model<float>(EncoderConfig{}, 1);
  const auto r = encode(m, Tensor<float>::from({1, 1, 2}, {0.5f, -1.0f}), Mode::eval);
  EXPECT_TRUE(r.all_finite());
}

TEST(Model, PooledRepresentationMode) {
  EncoderConfig c = testing::tiny_encoder();
  c.dense_repr = false;
  c.conv_channels = {4, 4, 5};
  auto m = init_model<double>(c, 0);
  EXPECT_EQ(c.representation_dim(), 5u);
  std::mt19937_64 gen(9);
  EXPECT_EQ(encode(m, random_tensor({2, 1, 12}, gen), Mode::eval).shape(), (Shape{2, 5}));
  EXPECT_EQ(project(m, random_tensor({2, 5}, gen)).shape(), (Shape{2, 5}));
}

TEST(Model, ConfigValidation) {
  EncoderConfig c;
  c.kernel_sizes = {8, 5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.repr_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ProjectionRowsHaveUnitNorm) {
  const auto m = init_model<float>(EncoderConfig{}, 4);
  std::mt19937_64 gen(5);
  const auto z = project(m, random_tensor({8, 320}, gen).cast<float>());
  for (std::size_t i = 0; i < 8; ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < 320; ++j) n += static_cast<double>(z(i, j)) * z(i, j);
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-5);
  }
}

TEST(Model, ProjectionBackwardMatchesFiniteDifferences) {
  const auto m = init_model<double>(testing::tiny_encoder(), 6);
  std::mt19937_64 gen(7);
  const auto x = random_tensor({3, 1, 16}, gen);
  const auto trace = forward(m, x, Mode::eval);
  const auto up = random_tensor(trace.z.shape(), gen);
  const auto grads = backward(m, trace, up);
  // Head parameters are the last four tensors.
  auto probe = m;
  auto params = probe.parameters();
  for (std::size_t p = params.size() - 4; p < params.size(); ++p) {
    Tensor<double>& t = *params[p].tensor;
    const auto f = [&](const Tensor<double>& v) {
      const Tensor<double> keep = t;
      t = v;
      const double s = testing::weighted_sum(project(probe, trace.r), up);
      t = keep;
      return s;
    };
    EXPECT_LT(testing::relative_error(grads[p], testing::numeric_gradient(f, t)), 1e-6)
        << params[p].name;
  }
}

TEST(Model, FullObjectiveGradientMatchesFiniteDifferences) {
  const auto m = init_model<double>(testing::tiny_encoder(), 21);
  std::mt19937_64 gen(22);
  const auto x = random_tensor({6, 1, 16}, gen);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  AugmentConfig aug;
  aug.num_augments = 2;
  for (const auto& check : testing::check_model_gradients(m, x, labels, aug, {}, 5)) {
    EXPECT_LT(check.error, 1e-4) << check.name;
  }
}

TEST(Model, EvalModeIsPermutationEquivariant) {
  auto m = init_model<float>(EncoderConfig{}, 2);
  std::mt19937_64 gen(8);
  const auto x = random_tensor({5, 1, 24}, gen).cast<float>();
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor<float> xp(x.shape());
  for (std::size_t i = 0; i < 5; ++i) {
    std::copy(x.raw() + perm[i] * 24, x.raw() + (perm[i] + 1) * 24, xp.raw() + i * 24);
  }
  const auto r = encode(m, x, Mode::eval), rp = encode(m, xp, Mode::eval);
  const auto z = project(m, r), zp = project(m, rp);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 320; ++j) {
      EXPECT_NEAR(rp(i, j), r(perm[i], j), 1e-5);
      EXPECT_NEAR(zp(i, j), z(perm[i], j), 1e-5);
    }
  }
}

TEST(Model, AdamStepChangesParametersAndCounts) {
  auto m = init_model<double>(testing::tiny_encoder(), 3);
  const auto before = *m.parameters()[0].tensor;
  ParameterGrads<double> grads;
  for (const auto& p : m.parameters()) grads.emplace_back(p.tensor->shape(), 1.0);
  apply_gradients(m, grads);
  EXPECT_FALSE(before == *m.parameters()[0].tensor);
  for (const auto& s : m.adam) EXPECT_EQ(s.step_count, 1u);
  grads.pop_back();
  EXPECT_THROW(apply_gradients(m, grads), DimensionError);
}

}  // namespace
}  // namespace rankscl
