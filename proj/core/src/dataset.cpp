#include "rankscl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rankscl/errors.hpp"
#include "rankscl/rng.hpp"

namespace rankscl {
namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<double> parse_number(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

float parse_value(std::string_view token, const std::string& where) {
  token = trim(token);
  if (iequals(token, "nan")) return std::numeric_limits<float>::quiet_NaN();
  const auto value = parse_number(token);
  if (!value) throw FormatError(where + ": cannot parse value '" + std::string(token) + "'");
  return static_cast<float>(*value);
}

std::string format_value(float v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<double>(v));
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

TimeSeriesDataset assemble(std::vector<float> values, std::size_t n, std::size_t length,
                           std::size_t features, const std::vector<std::string>& tokens,
                           const std::vector<std::size_t>& line_numbers,
                           const std::filesystem::path& path, const LabelMap* fixed) {
  TimeSeriesDataset ds;
  ds.x = Tensor<float>({n, length, features}, std::move(values));
  ds.label_map = fixed ? *fixed : LabelMap::from_tokens(tokens);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = ds.label_map.find(tokens[i]);
    if (!id) {
      throw FormatError(where(path, line_numbers[i]) + ": label '" + tokens[i] +
                        "' does not occur in the training labels");
    }
    ds.labels.push_back(*id);
  }
  return ds;
}

}  // namespace

std::optional<int> LabelMap::find(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

LabelMap LabelMap::from_tokens(const std::vector<std::string>& tokens) {
  std::set<std::string> distinct(tokens.begin(), tokens.end());
  LabelMap map;
  map.names.assign(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(map.names.begin(), map.names.end(),
                                   [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric) {
    std::stable_sort(map.names.begin(), map.names.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  return map;
}

std::vector<std::string> TimeSeriesDataset::label_names() const {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (int id : labels) out.push_back(label_map.names.at(static_cast<std::size_t>(id)));
  return out;
}

TimeSeriesDataset load_delimited(const std::filesystem::path& path, Delimiter delimiter,
                                 const LabelMap* labels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file " + path.string());

  std::vector<float> values;
  std::vector<std::string> tokens;
  std::vector<std::size_t> line_numbers;
  std::size_t length = 0;
  char sep = delimiter == Delimiter::comma ? ',' : '\t';
  bool sep_known = delimiter != Delimiter::auto_detect;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    if (!sep_known) {
      if (body.find('\t') != std::string_view::npos) {
        sep = '\t';
      } else if (body.find(',') != std::string_view::npos) {
        sep = ',';
      } else {
        throw FormatError(where(path, line_no) + ": cannot detect a tab or comma delimiter");
      }
      sep_known = true;
    }
    const auto fields = split(body, sep);
    if (fields.size() < 2) {
      throw FormatError(where(path, line_no) + ": expected a label followed by values");
    }
    const std::size_t count = fields.size() - 1;
    if (tokens.empty()) {
      length = count;
    } else if (count != length) {
      throw FormatError(where(path, line_no) + ": row has " + std::to_string(count) +
                        " values, expected " + std::to_string(length));
    }
    tokens.emplace_back(trim(fields[0]));
    line_numbers.push_back(line_no);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      values.push_back(parse_value(fields[i], where(path, line_no)));
    }
  }
  if (tokens.empty()) throw FormatError(path.string() + ": empty dataset file");
  return assemble(std::move(values), tokens.size(), length, 1, tokens, line_numbers, path, labels);
}

TimeSeriesDataset load_multivariate_jsonl(const std::filesystem::path& path,
                                          const LabelMap* labels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file " + path.string());

  std::vector<float> values;
  std::vector<std::string> tokens;
  std::vector<std::size_t> line_numbers;
  std::size_t length = 0, features = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string loc = where(path, line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(loc + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("label") || !obj.contains("series")) {
      throw FormatError(loc + ": expected an object with \"label\" and \"series\"");
    }
    const json& label = obj["label"];
    if (label.is_string()) {
      tokens.push_back(label.get<std::string>());
    } else if (label.is_number()) {
      tokens.push_back(label.dump());
    } else {
      throw FormatError(loc + ": label must be a string or a number");
    }
    const json& series = obj["series"];
    if (!series.is_array() || series.empty() || !series[0].is_array()) {
      throw FormatError(loc + ": series must be a non-empty array of per-variable arrays");
    }
    const std::size_t f_here = series.size();
    const std::size_t t_here = series[0].size();
    if (line_numbers.empty()) {
      features = f_here;
      length = t_here;
      if (length == 0) throw FormatError(loc + ": empty series");
    } else if (f_here != features) {
      throw FormatError(loc + ": " + std::to_string(f_here) + " variables, expected " +
                        std::to_string(features));
    }
    line_numbers.push_back(line_no);

    const std::size_t base = values.size();
    values.resize(base + length * features);
    for (std::size_t f = 0; f < features; ++f) {
      const json& var = series[f];
      if (!var.is_array() || var.size() != length) {
        throw FormatError(loc + ": variable " + std::to_string(f) + " has " +
                          std::to_string(var.is_array() ? var.size() : 0) +
                          " steps, expected " + std::to_string(length));
      }
      for (std::size_t t = 0; t < length; ++t) {
        const json& v = var[t];
        float value;
        if (v.is_null()) {
          value = std::numeric_limits<float>::quiet_NaN();
        } else if (v.is_number()) {
          value = static_cast<float>(v.get<double>());
        } else if (v.is_string() && iequals(v.get<std::string>(), "nan")) {
          value = std::numeric_limits<float>::quiet_NaN();
        } else {
          throw FormatError(loc + ": non-numeric value in variable " + std::to_string(f));
        }
        values[base + t * features + f] = value;
      }
    }
  }
  if (tokens.empty()) throw FormatError(path.string() + ": empty dataset file");
  return assemble(std::move(values), tokens.size(), length, features, tokens, line_numbers, path,
                  labels);
}

void save_delimited(const TimeSeriesDataset& dataset, const std::filesystem::path& path,
                    char delimiter) {
  if (dataset.features() != 1) {
    throw FormatError("delimited files hold univariate series; dataset has " +
                      std::to_string(dataset.features()) + " variables");
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::size_t length = dataset.length();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.label_map.names.at(static_cast<std::size_t>(dataset.labels[i]));
    for (std::size_t t = 0; t < length; ++t) out << delimiter << format_value(dataset.x(i, t, 0));
    out << '\n';
  }
}

void save_multivariate_jsonl(const TimeSeriesDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::size_t length = dataset.length(), features = dataset.features();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    json series = json::array();
    for (std::size_t f = 0; f < features; ++f) {
      json var = json::array();
      for (std::size_t t = 0; t < length; ++t) {
        const float v = dataset.x(i, t, f);
        if (std::isnan(v)) {
          var.push_back(nullptr);
        } else {
          var.push_back(static_cast<double>(v));
        }
      }
      series.push_back(std::move(var));
    }
    json obj = {{"label", dataset.label_map.names.at(static_cast<std::size_t>(dataset.labels[i]))},
                {"series", std::move(series)}};
    out << obj.dump() << '\n';
  }
}

NormStats fit_norm_stats(const TimeSeriesDataset& dataset) {
  const std::size_t features = dataset.features();
  const std::size_t groups = features == 1 ? 1 : features;
  std::vector<double> sum(groups, 0.0), count(groups, 0.0);
  const auto values = dataset.x.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    const std::size_t g = groups == 1 ? 0 : i % features;
    sum[g] += values[i];
    count[g] += 1.0;
  }
  NormStats stats;
  stats.mean.resize(groups);
  stats.stddev.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) stats.mean[g] = count[g] > 0 ? sum[g] / count[g] : 0.0;
  std::vector<double> sq(groups, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    const std::size_t g = groups == 1 ? 0 : i % features;
    const double d = values[i] - stats.mean[g];
    sq[g] += d * d;
  }
  for (std::size_t g = 0; g < groups; ++g) {
    stats.stddev[g] = count[g] > 0 ? std::sqrt(sq[g] / count[g]) : 1.0;
  }
  return stats;
}

TimeSeriesDataset apply_norm_stats(const TimeSeriesDataset& dataset, const NormStats& stats) {
  const std::size_t features = dataset.features();
  const std::size_t groups = stats.mean.size();
  if (groups != stats.stddev.size() || (groups != 1 && groups != features)) {
    throw DimensionError("normalization statistics cover " + std::to_string(groups) +
                         " variables, dataset has " + std::to_string(features));
  }
  TimeSeriesDataset out = dataset;
  auto values = out.x.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t g = groups == 1 ? 0 : i % features;
    const double scale = std::max(stats.stddev[g], 1e-8);
    values[i] = static_cast<float>((values[i] - stats.mean[g]) / scale);
  }
  out.norm_stats = stats;
  return out;
}

TimeSeriesDataset znormalize(const TimeSeriesDataset& dataset) {
  return apply_norm_stats(dataset, fit_norm_stats(dataset));
}

TimeSeriesDataset clean_missing(const TimeSeriesDataset& dataset) {
  TimeSeriesDataset out = dataset;
  for (float& v : out.x.values()) {
    if (std::isnan(v)) v = 0.0f;
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan,
                                              std::uint64_t epoch) {
  if (plan.batch_size < 2) throw ContractError("batch_size must be >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(plan.rng_seed, Stream::shuffle, epoch);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const std::size_t size = std::min(plan.batch_size, std::max<std::size_t>(n, 1));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += size) {
    const std::size_t end = std::min(start + size, n);
    if (plan.drop_last && end - start < size) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Tensor<float> gather_batch(const TimeSeriesDataset& dataset, const std::vector<std::size_t>& indices) {
  const std::size_t length = dataset.length(), features = dataset.features();
  Tensor<float> out({indices.size(), features, length});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    if (i >= dataset.size()) throw ContractError("batch index out of range");
    for (std::size_t t = 0; t < length; ++t) {
      for (std::size_t f = 0; f < features; ++f) out(b, f, t) = dataset.x(i, t, f);
    }
  }
  return out;
}

std::vector<int> gather_labels(const TimeSeriesDataset& dataset,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dataset.labels.at(i));
  return out;
}

Tensor<float> to_channels_first(const TimeSeriesDataset& dataset) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather_batch(dataset, all);
}

}  // namespace rankscl
