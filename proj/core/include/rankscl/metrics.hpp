#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace rankscl {

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<SeedResult> seeds;
};

// Macro averages run over the classes present in y_true; 0/0 counts as 0.
// `names` labels class ids in per_class (falls back to the id). Throws
// ContractError on a length mismatch or empty input.
MetricsReport metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                      const std::vector<std::string>& names = {});

// Means over the successful seeds; failed seeds are listed but not averaged.
MetricsReport aggregate(const std::vector<MetricsReport>& runs, const std::vector<SeedResult>& seeds);

SeedResult seed_result(std::uint64_t seed, const MetricsReport& report);

// Keys: accuracy, macro_precision, macro_recall, macro_f1, per_class, seeds.
std::string to_json(const MetricsReport& report);

}  // namespace rankscl
