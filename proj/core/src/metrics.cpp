#include "rankscl/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>
#include "rankscl/errors.hpp"

namespace rankscl {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

MetricsReport metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                      const std::vector<std::string>& names) {
  if (y_true.size() != y_pred.size()) {
    throw ContractError("metrics: " + std::to_string(y_true.size()) + " labels vs " +
                        std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.empty()) throw ContractError("metrics: empty input");

  const std::set<int> classes(y_true.begin(), y_true.end());
  MetricsReport report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
  report.accuracy = ratio(correct, y_true.size());

  for (int c : classes) {
    std::size_t tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      tp += t && p ? 1 : 0;
      predicted += p ? 1 : 0;
      actual += t ? 1 : 0;
    }
    ClassMetrics m;
    m.label = c >= 0 && static_cast<std::size_t>(c) < names.size() ? names[c] : std::to_string(c);
    m.precision = ratio(tp, predicted);
    m.recall = ratio(tp, actual);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    m.support = actual;
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    report.per_class.push_back(std::move(m));
  }
  const double k = static_cast<double>(classes.size());
  report.macro_precision /= k;
  report.macro_recall /= k;
  report.macro_f1 /= k;
  return report;
}

SeedResult seed_result(std::uint64_t seed, const MetricsReport& report) {
  SeedResult s;
  s.seed = seed;
  s.accuracy = report.accuracy;
  s.macro_precision = report.macro_precision;
  s.macro_recall = report.macro_recall;
  s.macro_f1 = report.macro_f1;
  return s;
}

MetricsReport aggregate(const std::vector<MetricsReport>& runs, const std::vector<SeedResult>& seeds) {
  MetricsReport out;
  out.seeds = seeds;
  if (runs.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.accuracy = out.macro_precision = out.macro_recall = out.macro_f1 = nan;
    return out;
  }
  const double n = static_cast<double>(runs.size());
  std::vector<std::string> order;
  std::map<std::string, ClassMetrics> sums;
  std::map<std::string, std::size_t> counts;
  for (const MetricsReport& r : runs) {
    out.accuracy += r.accuracy / n;
    out.macro_precision += r.macro_precision / n;
    out.macro_recall += r.macro_recall / n;
    out.macro_f1 += r.macro_f1 / n;
    for (const ClassMetrics& c : r.per_class) {
      auto [it, inserted] = sums.try_emplace(c.label);
      if (inserted) {
        order.push_back(c.label);
        it->second.label = c.label;
        it->second.support = c.support;
      }
      it->second.precision += c.precision;
      it->second.recall += c.recall;
      it->second.f1 += c.f1;
      ++counts[c.label];
    }
  }
  for (const std::string& label : order) {
    ClassMetrics m = sums[label];
    const double k = static_cast<double>(counts[label]);
    m.precision /= k;
    m.recall /= k;
    m.f1 /= k;
    out.per_class.push_back(std::move(m));
  }
  return out;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = number(report.accuracy);
  j["macro_precision"] = number(report.macro_precision);
  j["macro_recall"] = number(report.macro_recall);
  j["macro_f1"] = number(report.macro_f1);
  nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
  for (const ClassMetrics& c : report.per_class) {
    nlohmann::ordered_json e;
    e["label"] = c.label;
    e["precision"] = number(c.precision);
    e["recall"] = number(c.recall);
    e["f1"] = number(c.f1);
    e["support"] = c.support;
    per_class.push_back(std::move(e));
  }
  j["per_class"] = std::move(per_class);
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const SeedResult& s : report.seeds) {
    nlohmann::ordered_json e;
    e["seed"] = s.seed;
    e["status"] = s.ok ? "ok" : "failed";
    if (s.ok) {
      e["accuracy"] = number(s.accuracy);
      e["macro_precision"] = number(s.macro_precision);
      e["macro_recall"] = number(s.macro_recall);
      e["macro_f1"] = number(s.macro_f1);
    } else {
      e["error"] = s.error;
    }
    seeds.push_back(std::move(e));
  }
  j["seeds"] = std::move(seeds);
  return j.dump(2);
}

}  // namespace rankscl
