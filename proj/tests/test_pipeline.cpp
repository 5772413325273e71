#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "rankscl/errors.hpp"
#include "rankscl/pipeline.hpp"
#include "rankscl/synthetic.hpp"
#include "support.hpp"

namespace rankscl {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::vector<const char*> argv{"rankscl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

TEST(Config, DefaultsMatchDocumentation) {
  const RunConfig c = resolve_config({}, {});
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.weight_decay, 5e-4);
  EXPECT_EQ(c.num_augments, 5u);
  EXPECT_EQ(c.jitter_scales, (std::vector<double>{0.03, 0.05}));
  EXPECT_EQ(c.loss_normalization, LossNormalization::mean);
  EXPECT_EQ(c.negative_domain, NegativeDomain::all);
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.encoder.repr_dim, 320u);
}

TEST(Config, FlagBeatsFileBeatsDefault) {
  const auto dir = testing::scratch_dir("config");
  std::ofstream(dir / "run.cfg") << "# comment line\n"
                                    "epochs = 7   # trailing comment\n"
                                    "batch_size = 16\n"
                                    "\n"
                                    "negative-domain = valid\n";
  const auto file = read_config_file(dir / "run.cfg");
  const RunConfig c = resolve_config(file, {{"epochs", "3"}});
  EXPECT_EQ(c.epochs, 3u);               // flag
  EXPECT_EQ(c.batch_size, 16u);          // file
  EXPECT_EQ(c.negative_domain, NegativeDomain::valid_only);
  EXPECT_EQ(c.learning_rate, 1e-4);      // default
}

TEST(Config, Errors) {
  EXPECT_THROW(resolve_config({{"epochz", "3"}}, {}), ConfigError);
  EXPECT_THROW(resolve_config({}, {{"epochs", "-1"}}), ConfigError);
  EXPECT_THROW(resolve_config({}, {{"batch-size", "1"}}), ConfigError);
  EXPECT_THROW(resolve_config({}, {{"learning-rate", "fast"}}), ConfigError);
  EXPECT_THROW(resolve_config({}, {{"jitter-scales", "0.03,,0.05"}}), ConfigError);
  EXPECT_THROW(resolve_config({}, {{"conv-channels", "4,4"}}), ConfigError);
  const auto dir = testing::scratch_dir("config-errors");
  std::ofstream(dir / "bad.cfg") << "epochs 3\n";
  EXPECT_THROW(read_config_file(dir / "bad.cfg"), ConfigError);
  const RunConfig c = resolve_config({}, {{"c-grid", "1, 10, inf"}, {"seeds", "4"}, {"repr-mode", "pooled"}});
  EXPECT_TRUE(std::isinf(c.c_grid.back()));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4}));
  EXPECT_FALSE(c.encoder.dense_repr);
}

TEST(RepresentationFile, FormatAndRoundTrip) {
  const auto dir = testing::scratch_dir("reps");
  const auto reps = Tensor<float>::from({2, 3}, {0.1f, -2.5f, 3e-8f, 1.0f / 3.0f, 0.0f, 1e20f});
  write_representations(reps, dir / "r.txt");
  const std::string text = slurp(dir / "r.txt");
  EXPECT_EQ(text.substr(0, text.find('\n')), "2 3");
  EXPECT_TRUE(bitwise_equal(read_representations(dir / "r.txt"), reps));

  std::ofstream(dir / "bad.txt") << "2 3\n1 2 3\n4 5\n";
  EXPECT_THROW(read_representations(dir / "bad.txt"), FormatError);
  std::ofstream(dir / "short.txt") << "3 1\n1\n2\n";
  EXPECT_THROW(read_representations(dir / "short.txt"), FormatError);
}

class PipelineRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::scratch_dir("pipeline");
    SineSpec spec;
    spec.per_class = 8;
    spec.length = 24;
    save_delimited(make_sines(spec, 1), dir_ / "train.tsv");
    save_delimited(make_sines(spec, 2), dir_ / "test.tsv");
  }

  RunConfig small_config(const std::filesystem::path& out) const {
    return resolve_config({}, {{"train", (dir_ / "train.tsv").string()},
                               {"test", (dir_ / "test.tsv").string()},
                               {"epochs", "3"},
                               {"batch-size", "16"},
                               {"conv-channels", "8,8,8"},
                               {"repr-dim", "16"},
                               {"seeds", "0"},
                               {"c-grid", "1,10"},
                               {"output-dir", out.string()}});
  }

  std::filesystem::path dir_;
};

TEST_F(PipelineRun, TrainWritesCheckpointAndLog) {
  RunConfig c = small_config(dir_ / "t");
  const auto result = cmd_train(c, 0, dir_ / "t");
  ASSERT_EQ(result.log.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "t" / "model.rscl"));
  std::ifstream log(dir_ / "t" / "train_log.txt");
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "epoch mean_loss seconds");

  const auto again = cmd_train(c, 0, dir_ / "t2");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(result.log[i].mean_loss, again.log[i].mean_loss);
  c.num_augments = 0;
  cmd_train(c, 0, dir_ / "t3");
  EXPECT_NE(slurp(dir_ / "t" / "model.rscl"), slurp(dir_ / "t3" / "model.rscl"));
}

TEST_F(PipelineRun, EncodeRejectsFeatureMismatchBeforeWriting) {
  const RunConfig c = small_config(dir_ / "e");
  cmd_train(c, 0, dir_ / "e");
  std::ofstream(dir_ / "mv.jsonl") << R"({"label": 0, "series": [[1, 2, 3], [1, 2, 3]]})" << '\n';
  EXPECT_THROW(cmd_encode(dir_ / "e" / "model.rscl", dir_ / "mv.jsonl", DataFormat::jsonl, dir_ / "e" / "out.txt"),
               DimensionError);
  EXPECT_FALSE(std::filesystem::exists(dir_ / "e" / "out.txt"));

  cmd_encode(dir_ / "e" / "model.rscl", dir_ / "test.tsv", DataFormat::delimited, dir_ / "e" / "r1.txt",
             dir_ / "e" / "l1.txt");
  cmd_encode(dir_ / "e" / "model.rscl", dir_ / "test.tsv", DataFormat::delimited, dir_ / "e" / "r2.txt");
  EXPECT_EQ(slurp(dir_ / "e" / "r1.txt"), slurp(dir_ / "e" / "r2.txt"));
  const auto reps = read_representations(dir_ / "e" / "r1.txt");
  EXPECT_EQ(reps.shape(), (Shape{24, 16}));
  EXPECT_EQ(read_labels(dir_ / "e" / "l1.txt").size(), 24u);
  // The head is dropped: representations are not unit vectors.
  double norm = 0.0;
  for (std::size_t j = 0; j < 16; ++j) norm += static_cast<double>(reps(0, j)) * reps(0, j);
  EXPECT_GT(std::abs(std::sqrt(norm) - 1.0), 1e-3);
}

TEST_F(PipelineRun, EvaluateResubstitutionAndDimensionCheck) {
  const auto reps = Tensor<float>::from({4, 2}, {0, 0, 0.1f, 0, 5, 5, 5.1f, 5});
  const std::vector<std::string> labels{"a", "a", "b", "b"};
  const auto r = evaluate_representations(reps, labels, reps, labels, RunConfig{});
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_THROW(evaluate_representations(reps, labels, Tensor<float>({4, 3}), labels, RunConfig{}),
               DimensionError);
  EXPECT_THROW(evaluate_representations(reps, labels, reps, {"a", "a", "b", "c"}, RunConfig{}),
               FormatError);
}

TEST_F(PipelineRun, PipelineIsBitwiseReproducible) {
  const auto a = cmd_pipeline(small_config(dir_ / "p1"));
  const auto b = cmd_pipeline(small_config(dir_ / "p2"));
  for (const char* f : {"seed-0/model.rscl", "seed-0/train_repr.txt", "seed-0/test_repr.txt",
                        "seed-0/metrics.json", "metrics.json"}) {
    EXPECT_EQ(slurp(dir_ / "p1" / f), slurp(dir_ / "p2" / f)) << f;
  }
  // One seed: the aggregate equals the single run.
  const auto single = nlohmann::json::parse(slurp(dir_ / "p1" / "seed-0" / "metrics.json"));
  EXPECT_EQ(single["accuracy"].get<double>(), a.accuracy);
  EXPECT_EQ(a.seeds.size(), 1u);
  EXPECT_EQ(b.accuracy, a.accuracy);
}

TEST_F(PipelineRun, CliExitCodes) {
  std::string out, err;
  EXPECT_EQ(run({}, &out, &err), 1);
  EXPECT_EQ(run({"--help"}, &out, &err), 0);
  EXPECT_EQ(run({"train", "--epochs", "zero"}, &out, &err), 1);
  EXPECT_EQ(run({"train", "--bogus"}, &out, &err), 1);
  std::ofstream(dir_ / "ragged.tsv") << "1\t1\t2\n2\t1\n";
  EXPECT_EQ(run({"train", "--train", (dir_ / "ragged.tsv").string()}, &out, &err), 2);
  EXPECT_NE(err.find("ragged.tsv:2"), std::string::npos) << err;
  std::ofstream(dir_ / "junk.rscl") << "nope";
  EXPECT_EQ(run({"encode", "--checkpoint", (dir_ / "junk.rscl").string(), "--data",
                 (dir_ / "test.tsv").string(), "--output", (dir_ / "x.txt").string()},
                &out, &err),
            2);
  // A divergent learning rate overflows the weights within one step.
  std::ofstream(dir_ / "cfg.txt") << "epochs = 2\nbatch-size = 8\nconv-channels = 2,2,2\nrepr-dim = 3\n";
  EXPECT_EQ(run({"train", "--config", (dir_ / "cfg.txt").string(), "--train", (dir_ / "train.tsv").string(),
                 "--learning-rate", "1e38", "--output-dir", (dir_ / "nan-out").string()},
                &out, &err),
            3)
      << err;
}

TEST_F(PipelineRun, CliEndToEnd) {
  std::string out, err;
  const auto o = (dir_ / "cli").string();
  ASSERT_EQ(run({"train", "--train", (dir_ / "train.tsv").string(), "--epochs", "2", "--batch-size", "16",
                 "--conv-channels", "8,8,8", "--repr-dim", "8", "--output-dir", o, "--seed", "3"},
                &out, &err),
            0)
      << err;
  ASSERT_EQ(run({"encode", "--checkpoint", o + "/model.rscl", "--data", (dir_ / "train.tsv").string(),
                 "--output", o + "/tr.txt", "--labels-output", o + "/tr.labels"},
                &out, &err),
            0)
      << err;
  ASSERT_EQ(run({"encode", "--checkpoint", o + "/model.rscl", "--data", (dir_ / "test.tsv").string(),
                 "--output", o + "/te.txt", "--labels-output", o + "/te.labels"},
                &out, &err),
            0)
      << err;
  ASSERT_EQ(run({"evaluate", "--train-reps", o + "/tr.txt", "--train-labels", o + "/tr.labels", "--test-reps",
                 o + "/te.txt", "--test-labels", o + "/te.labels", "--c-grid", "1", "--output", o + "/m.json"},
                &out, &err),
            0)
      << err;
  const auto j = nlohmann::json::parse(out);
  EXPECT_TRUE(j.contains("macro_f1"));
  EXPECT_EQ(nlohmann::json::parse(slurp(o + "/m.json")), j);
}

}  // namespace
}  // namespace rankscl
