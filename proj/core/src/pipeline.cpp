#include "rankscl/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rankscl/errors.hpp"
#include "rankscl/svm.hpp"

namespace rankscl {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string canonical_key(std::string_view key) {
  std::string out = lower(trim(key));
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view why) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": " +
                    std::string(why));
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  const std::string_view v = trim(text);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    bad_value(key, text, "expected a non-negative integer");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view text) {
  const std::string_view v = trim(text);
  const std::string low = lower(v);
  if (low == "inf" || low == "infinity" || low == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || std::isnan(out)) {
    bad_value(key, text, "expected a number");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view key, std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(',', start);
    const std::string_view item =
        trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (item.empty()) bad_value(key, text, "empty list element");
    out.push_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t positive_size(std::string_view key, std::string_view value, std::size_t minimum) {
  const std::uint64_t v = parse_unsigned(key, value);
  if (v < minimum) bad_value(key, value, "must be >= " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string format_float(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

TimeSeriesDataset prepare_training(const TimeSeriesDataset& raw) {
  return clean_missing(znormalize(raw));
}

// Trains on an already loaded training split and writes the seed artifacts.
Checkpoint train_and_save(const TimeSeriesDataset& raw, const RunConfig& config, std::uint64_t seed,
                          const std::filesystem::path& out_dir) {
  const TimeSeriesDataset train = prepare_training(raw);
  ensure_dir(out_dir);
  std::ofstream log(out_dir / "train_log.txt");
  if (!log) throw FormatError("cannot write " + (out_dir / "train_log.txt").string());
  log << "epoch mean_loss seconds\n";
  TrainResult result = train_encoder(train, config.train_options(), seed, [&](const EpochLog& e) {
    log << e.epoch << ' ' << e.mean_loss << ' ' << e.seconds << '\n';
    log.flush();
  });
  Checkpoint checkpoint{std::move(result.model), train.norm_stats};
  save_checkpoint(checkpoint, out_dir / "model.rscl");
  return checkpoint;
}

Tensor<double> to_double(const Tensor<float>& t) { return t.cast<double>(); }

}  // namespace

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.encoder = encoder;
  o.adam.learning_rate = learning_rate;
  o.adam.weight_decay = weight_decay;
  o.augment.num_augments = num_augments;
  o.augment.scales = jitter_scales;
  o.loss.negative_domain = negative_domain;
  o.loss.normalization = loss_normalization;
  o.epochs = epochs;
  o.batch_size = batch_size;
  return o;
}

void apply_setting(RunConfig& config, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = canonical_key(raw_key);
  const std::string_view value = trim(raw_value);
  if (key == "train") {
    config.train_path = std::string(value);
  } else if (key == "test") {
    config.test_path = std::string(value);
  } else if (key == "format") {
    const std::string v = lower(value);
    if (v == "delimited" || v == "ucr" || v == "tsv" || v == "csv") {
      config.format = DataFormat::delimited;
    } else if (v == "jsonl") {
      config.format = DataFormat::jsonl;
    } else {
      bad_value(key, value, "expected delimited or jsonl");
    }
  } else if (key == "epochs") {
    config.epochs = positive_size(key, value, 1);
  } else if (key == "batch-size") {
    config.batch_size = positive_size(key, value, 2);
  } else if (key == "learning-rate") {
    const double v = parse_real(key, value);
    if (!(v > 0.0) || std::isinf(v)) bad_value(key, value, "must be a positive finite number");
    config.learning_rate = v;
  } else if (key == "weight-decay") {
    const double v = parse_real(key, value);
    if (!(v >= 0.0) || std::isinf(v)) bad_value(key, value, "must be a finite number >= 0");
    config.weight_decay = v;
  } else if (key == "num-augments") {
    config.num_augments = static_cast<std::size_t>(parse_unsigned(key, value));
  } else if (key == "jitter-scales") {
    std::vector<double> scales;
    for (std::string_view item : split_list(key, value)) {
      const double v = parse_real(key, item);
      if (!(v >= 0.0) || std::isinf(v)) bad_value(key, value, "scales must be finite and >= 0");
      scales.push_back(v);
    }
    config.jitter_scales = std::move(scales);
  } else if (key == "loss-normalization") {
    const std::string v = lower(value);
    if (v == "mean") {
      config.loss_normalization = LossNormalization::mean;
    } else if (v == "sum") {
      config.loss_normalization = LossNormalization::sum;
    } else {
      bad_value(key, value, "expected mean or sum");
    }
  } else if (key == "negative-domain") {
    const std::string v = lower(value);
    if (v == "all") {
      config.negative_domain = NegativeDomain::all;
    } else if (v == "valid" || v == "valid-only" || v == "valid_only") {
      config.negative_domain = NegativeDomain::valid_only;
    } else {
      bad_value(key, value, "expected all or valid");
    }
  } else if (key == "seeds") {
    std::vector<std::uint64_t> seeds;
    for (std::string_view item : split_list(key, value)) seeds.push_back(parse_unsigned(key, item));
    config.seeds = std::move(seeds);
  } else if (key == "conv-channels" || key == "kernel-sizes") {
    std::vector<std::size_t> sizes;
    for (std::string_view item : split_list(key, value)) sizes.push_back(positive_size(key, item, 1));
    (key == "conv-channels" ? config.encoder.conv_channels : config.encoder.kernel_sizes) =
        std::move(sizes);
  } else if (key == "repr-dim") {
    config.encoder.repr_dim = positive_size(key, value, 1);
  } else if (key == "repr-mode") {
    const std::string v = lower(value);
    if (v == "dense") {
      config.encoder.dense_repr = true;
    } else if (v == "pooled") {
      config.encoder.dense_repr = false;
    } else {
      bad_value(key, value, "expected dense or pooled");
    }
  } else if (key == "output-dir") {
    config.output_dir = std::string(value);
  } else if (key == "c-grid") {
    std::vector<double> grid;
    for (std::string_view item : split_list(key, value)) {
      const double v = parse_real(key, item);
      if (!(v > 0.0)) bad_value(key, value, "C values must be > 0");
      grid.push_back(v);
    }
    config.c_grid = std::move(grid);
  } else if (key == "cv-folds") {
    config.cv_folds = positive_size(key, value, 2);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(raw_key) + "'");
  }
}

std::vector<Setting> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<Setting> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string_view key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(body.substr(eq + 1))));
  }
  return out;
}

RunConfig resolve_config(const std::vector<Setting>& file_settings,
                         const std::vector<Setting>& flag_settings) {
  RunConfig config;
  for (const auto& [k, v] : file_settings) apply_setting(config, k, v);
  for (const auto& [k, v] : flag_settings) apply_setting(config, k, v);
  config.encoder.validate();
  config.train_options().augment.validate();
  return config;
}

TimeSeriesDataset load_dataset(const std::filesystem::path& path, DataFormat format,
                               const LabelMap* labels) {
  return format == DataFormat::jsonl ? load_multivariate_jsonl(path, labels)
                                     : load_delimited(path, Delimiter::auto_detect, labels);
}

void write_representations(const Tensor<float>& reps, const std::filesystem::path& path) {
  require_rank(reps, 2, "representations");
  ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::size_t n = reps.dim(0), d = reps.dim(1);
  out << n << ' ' << d << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (j > 0) out << ' ';
      out << format_float(reps(i, j));
    }
    out << '\n';
  }
}

Tensor<float> read_representations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open representation file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing 'N D' header");
  std::istringstream header(line);
  std::size_t n = 0, d = 0;
  std::string extra;
  if (!(header >> n >> d) || (header >> extra)) {
    throw FormatError(path.string() + ":1: header must be 'N D'");
  }
  std::vector<float> values;
  values.reserve(n * d);
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = trim(line);
    if (body.empty()) continue;
    std::size_t count = 0;
    while (!body.empty()) {
      const auto space = body.find_first_of(" \t");
      const std::string_view token = body.substr(0, space);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                          std::string(token) + "'");
      }
      values.push_back(v);
      ++count;
      body = space == std::string_view::npos ? std::string_view{} : trim(body.substr(space));
    }
    if (count != d) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": row has " +
                        std::to_string(count) + " values, expected " + std::to_string(d));
    }
    ++rows;
  }
  if (rows != n) {
    throw FormatError(path.string() + ": header announces " + std::to_string(n) + " rows, found " +
                      std::to_string(rows));
  }
  return Tensor<float>({n, d}, std::move(values));
}

void write_labels(const std::vector<std::string>& labels, const std::filesystem::path& path) {
  ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const std::string& l : labels) out << l << '\n';
}

std::vector<std::string> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

TrainResult cmd_train(const RunConfig& config, std::uint64_t seed,
                      const std::filesystem::path& out_dir) {
  if (config.train_path.empty()) throw ConfigError("no training data given (train)");
  const TimeSeriesDataset raw = load_dataset(config.train_path, config.format);
  Checkpoint checkpoint = train_and_save(raw, config, seed, out_dir);
  TrainResult result{std::move(checkpoint.model), {}};
  std::ifstream log(out_dir / "train_log.txt");
  std::string header;
  std::getline(log, header);
  EpochLog e;
  while (log >> e.epoch >> e.mean_loss >> e.seconds) result.log.push_back(e);
  return result;
}

Tensor<float> encode_series(const Checkpoint& checkpoint, const TimeSeriesDataset& data) {
  check_input_features(checkpoint.model, data.features());
  const TimeSeriesDataset normalized =
      checkpoint.normalization ? apply_norm_stats(data, *checkpoint.normalization) : data;
  return encode_eval(checkpoint.model, to_channels_first(clean_missing(normalized)));
}

void cmd_encode(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                DataFormat format, const std::filesystem::path& output,
                const std::optional<std::filesystem::path>& labels_output) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const TimeSeriesDataset ds = load_dataset(data, format);
  const Tensor<float> reps = encode_series(ckpt, ds);
  write_representations(reps, output);
  if (labels_output) write_labels(ds.label_names(), *labels_output);
}

MetricsReport evaluate_representations(const Tensor<float>& train_reps,
                                       const std::vector<std::string>& train_labels,
                                       const Tensor<float>& test_reps,
                                       const std::vector<std::string>& test_labels,
                                       const RunConfig& config) {
  require_rank(train_reps, 2, "train representations");
  require_rank(test_reps, 2, "test representations");
  if (train_reps.dim(0) != train_labels.size() || test_reps.dim(0) != test_labels.size()) {
    throw DimensionError("representation rows and labels differ in count");
  }
  if (train_reps.dim(1) != test_reps.dim(1)) {
    throw DimensionError("train representations have dimension " +
                         std::to_string(train_reps.dim(1)) + ", test " +
                         std::to_string(test_reps.dim(1)));
  }
  if (!train_reps.all_finite() || !test_reps.all_finite()) {
    throw NumericError("representations contain NaN or Inf");
  }
  const LabelMap map = LabelMap::from_tokens(train_labels);
  auto ids = [&](const std::vector<std::string>& tokens) {
    std::vector<int> out;
    for (const std::string& t : tokens) {
      const auto id = map.find(t);
      if (!id) throw FormatError("test label '" + t + "' does not occur in the training labels");
      out.push_back(*id);
    }
    return out;
  };
  const std::vector<int> y_train = ids(train_labels);
  const std::vector<int> y_test = ids(test_labels);

  SelectOptions options;
  if (!config.c_grid.empty()) options.c_grid = config.c_grid;
  options.folds = config.cv_folds;
  const SvmModel model = svm_fit_select(to_double(train_reps), y_train, options);
  return metrics(y_test, predict(model, to_double(test_reps)), map.names);
}

MetricsReport cmd_evaluate(const std::filesystem::path& train_reps,
                           const std::filesystem::path& train_labels,
                           const std::filesystem::path& test_reps,
                           const std::filesystem::path& test_labels, const RunConfig& config,
                           const std::optional<std::filesystem::path>& output) {
  const MetricsReport report =
      evaluate_representations(read_representations(train_reps), read_labels(train_labels),
                               read_representations(test_reps), read_labels(test_labels), config);
  if (output) {
    ensure_dir(output->parent_path());
    std::ofstream out(*output);
    if (!out) throw FormatError("cannot write " + output->string());
    out << to_json(report) << '\n';
  }
  return report;
}

MetricsReport cmd_pipeline(const RunConfig& config) {
  if (config.train_path.empty() || config.test_path.empty()) {
    throw ConfigError("pipeline needs both train and test data");
  }
  if (config.seeds.empty()) throw ConfigError("no seeds given");
  const TimeSeriesDataset train = load_dataset(config.train_path, config.format);
  const TimeSeriesDataset test = load_dataset(config.test_path, config.format, &train.label_map);
  if (train.features() != test.features()) {
    throw DimensionError("train has " + std::to_string(train.features()) + " variables, test " +
                         std::to_string(test.features()));
  }
  ensure_dir(config.output_dir);

  std::vector<MetricsReport> runs;
  std::vector<SeedResult> seeds;
  for (std::uint64_t seed : config.seeds) {
    const std::filesystem::path dir = config.output_dir / ("seed-" + std::to_string(seed));
    try {
      const Checkpoint checkpoint = train_and_save(train, config, seed, dir);
      const Tensor<float> train_reps = encode_series(checkpoint, train);
      const Tensor<float> test_reps = encode_series(checkpoint, test);
      write_representations(train_reps, dir / "train_repr.txt");
      write_representations(test_reps, dir / "test_repr.txt");
      write_labels(train.label_names(), dir / "train_labels.txt");
      write_labels(test.label_names(), dir / "test_labels.txt");
      MetricsReport report = evaluate_representations(train_reps, train.label_names(), test_reps,
                                                      test.label_names(), config);
      std::ofstream(dir / "metrics.json") << to_json(report) << '\n';
      seeds.push_back(seed_result(seed, report));
      runs.push_back(std::move(report));
    } catch (const NumericError& e) {
      SeedResult failed;
      failed.seed = seed;
      failed.ok = false;
      failed.error = e.what();
      seeds.push_back(std::move(failed));
    }
  }
  const MetricsReport overall = aggregate(runs, seeds);
  std::ofstream out(config.output_dir / "metrics.json");
  if (!out) throw FormatError("cannot write " + (config.output_dir / "metrics.json").string());
  out << to_json(overall) << '\n';
  if (runs.empty()) throw NumericError("every seed failed; see " + (config.output_dir / "metrics.json").string());
  return overall;
}

}  // namespace rankscl
