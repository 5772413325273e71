#include "cli.hpp"

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rankscl/errors.hpp"
#include "rankscl/pipeline.hpp"

namespace rankscl {
namespace {

const std::vector<std::string> kTrainKeys{
    "train",         "format",        "epochs",         "batch-size",
    "learning-rate", "weight-decay",  "num-augments",   "jitter-scales",
    "loss-normalization", "negative-domain", "seeds", "conv-channels",
    "kernel-sizes",  "repr-dim",      "repr-mode",      "output-dir"};

const std::vector<std::string> kEvalKeys{"c-grid", "cv-folds"};

const std::map<std::string, std::string> kHelp{
    {"train", "training split (UCR-style delimited file or jsonl)"},
    {"test", "test split, same format as --train"},
    {"format", "delimited (default) | jsonl"},
    {"epochs", "training epochs (default 100)"},
    {"batch-size", "batch size (default 128)"},
    {"learning-rate", "Adam learning rate (default 1e-4)"},
    {"weight-decay", "decoupled weight decay (default 5e-4)"},
    {"num-augments", "jittered copies per embedding (default 5)"},
    {"jitter-scales", "noise scales cycled over the copies (default 0.03,0.05)"},
    {"loss-normalization", "mean (default) | sum"},
    {"negative-domain", "all (default) | valid"},
    {"seeds", "comma-separated seeds (default 0,1,2,3,4)"},
    {"conv-channels", "three conv widths (default 128,256,128)"},
    {"kernel-sizes", "three kernel sizes (default 8,5,3)"},
    {"repr-dim", "representation size (default 320)"},
    {"repr-mode", "dense (default) | pooled"},
    {"output-dir", "artifact directory (default rankscl-out)"},
    {"c-grid", "SVM penalties, inf allowed (default 1e-4..1e4,inf)"},
    {"cv-folds", "cross-validation folds for C (default 5)"},
};

// Config flags shared by every subcommand; collected as raw settings so
// resolve_config can apply the file/flag precedence.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app, const std::vector<std::string>& keys) {
    app.add_option("--config", config_file, "key = value configuration file");
    for (const std::string& key : keys) {
      options[key] = app.add_option("--" + key, values[key], kHelp.at(key));
    }
  }

  RunConfig resolve() const {
    std::vector<Setting> file;
    if (!config_file.empty()) file = read_config_file(config_file);
    std::vector<Setting> flags;
    for (const auto& [key, option] : options) {
      if (option->count() > 0) flags.emplace_back(key, values.at(key));
    }
    return resolve_config(file, flags);
  }
};

DataFormat parse_format(const std::string& text) {
  RunConfig probe;
  apply_setting(probe, "format", text);
  return probe.format;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank supervised contrastive learning for time series classification", "rankscl"};
  app.require_subcommand(1);

  ConfigFlags train_flags, eval_flags, pipeline_flags;
  std::uint64_t train_seed = 0;
  bool seed_given = false;
  CLI::App* train = app.add_subcommand("train", "train an encoder and write a checkpoint");
  train_flags.attach(*train, kTrainKeys);
  CLI::Option* seed_opt = train->add_option("--seed", train_seed, "training seed (default: first of --seeds)");

  std::string checkpoint, data, output, labels_output, format = "delimited";
  CLI::App* encode = app.add_subcommand("encode", "write encoder representations of a dataset");
  encode->add_option("--checkpoint", checkpoint)->required();
  encode->add_option("--data", data)->required();
  encode->add_option("--format", format);
  encode->add_option("--output", output)->required();
  encode->add_option("--labels-output", labels_output, "also write one label per line");

  std::string train_reps, train_labels, test_reps, test_labels, metrics_out;
  CLI::App* evaluate = app.add_subcommand("evaluate", "fit the SVM on train representations, score test");
  eval_flags.attach(*evaluate, kEvalKeys);
  evaluate->add_option("--train-reps", train_reps)->required();
  evaluate->add_option("--train-labels", train_labels)->required();
  evaluate->add_option("--test-reps", test_reps)->required();
  evaluate->add_option("--test-labels", test_labels)->required();
  evaluate->add_option("--output", metrics_out, "metrics JSON path (always printed)");

  CLI::App* pipeline = app.add_subcommand("pipeline", "train, encode and evaluate for every seed");
  pipeline_flags.attach(*pipeline, concat(concat(kTrainKeys, {"test"}), kEvalKeys));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      const RunConfig config = train_flags.resolve();
      seed_given = seed_opt->count() > 0;
      const std::uint64_t seed = seed_given ? train_seed : config.seeds.front();
      const TrainResult result = cmd_train(config, seed, config.output_dir);
      out << "wrote " << (config.output_dir / "model.rscl").string() << " after "
          << result.log.size() << " epochs, final mean loss "
          << (result.log.empty() ? 0.0 : result.log.back().mean_loss) << '\n';
    } else if (*encode) {
      cmd_encode(checkpoint, data, parse_format(format), output,
                 labels_output.empty() ? std::nullopt
                                       : std::optional<std::filesystem::path>(labels_output));
      out << "wrote " << output << '\n';
    } else if (*evaluate) {
      const RunConfig config = eval_flags.resolve();
      const MetricsReport report =
          cmd_evaluate(train_reps, train_labels, test_reps, test_labels, config,
                       metrics_out.empty() ? std::nullopt
                                           : std::optional<std::filesystem::path>(metrics_out));
      out << to_json(report) << '\n';
    } else if (*pipeline) {
      const RunConfig config = pipeline_flags.resolve();
      out << to_json(cmd_pipeline(config)) << '\n';
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace rankscl
