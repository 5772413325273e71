// Acceptance suite: one PASS/FAIL line per criterion.
//
//   rankscl-acceptance                 run every criterion
//   rankscl-acceptance --criterion 3   run one (repeatable)
//
// Criteria 6 and 7 use the SyntheticControl archive split when
// $RANKSCL_UCR_DIR/SyntheticControl/SyntheticControl_{TRAIN,TEST}.tsv
// exist, otherwise the generated control-chart split.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "rankscl/checkpoint.hpp"
#include "rankscl/metrics.hpp"
#include "rankscl/pipeline.hpp"
#include "rankscl/rank_loss.hpp"
#include "rankscl/svm.hpp"
#include "rankscl/synthetic.hpp"
#include "support.hpp"
#include "svm_oracle.hpp"

namespace rankscl {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rankscl-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Labels for a batch of b >= 4 rows: 2-4 classes, each with at least two
// members.
std::vector<int> random_labels(std::size_t b, std::mt19937_64& gen) {
  const std::size_t classes = 2 + gen() % std::min<std::size_t>(3, b / 2 - 1);
  std::vector<int> y(b);
  for (std::size_t i = 0; i < b; ++i) y[i] = static_cast<int>(i < 2 * classes ? i / 2 : gen() % classes);
  std::shuffle(y.begin(), y.end(), gen);
  return y;
}

Outcome gradient_suite() {
  const Stopwatch watch;
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const testing::TensorCheck& c) {
    if (c.error > worst) {
      worst = c.error;
      worst_name = c.name;
    }
  };
  for (const auto& c : testing::check_layer_gradients(101)) note(c);

  const auto model = init_model<double>(testing::tiny_encoder(), 7);
  std::mt19937_64 gen(8);
  const auto x = random_tensor({6, 1, 16}, gen);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  AugmentConfig aug;
  aug.num_augments = 2;
  for (auto c : testing::check_model_gradients(model, x, labels, aug, {}, 9)) {
    c.name = "model." + c.name;
    note(c);
  }
  const double secs = watch.seconds();
  return {worst < 1e-4 && secs < 60.0,
          "max relative error " + fmt(worst) + " (" + worst_name + "), limit 1e-4; " + fmt(secs) +
              " s, limit 60 s"};
}

Outcome rank_oracle_suite() {
  std::mt19937_64 gen(202);
  std::size_t triplet_mismatch = 0, rank_mismatch = 0, pairs = 0, ties = 0;
  for (int batch = 0; batch < 200; ++batch) {
    const std::size_t b = 4 + gen() % 17, d = 1 + gen() % 8;
    const auto y = random_labels(b, gen);
    // Integer coordinates: squared distances are exact, ties occur.
    Tensor<double> z({b, d});
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(static_cast<int>(gen() % 7) - 3);
    const auto dist = pairwise_distances(z);
    const auto naive = testing::naive_distances(z);
    if (valid_triplets(dist, y) != testing::brute_triplets(naive, y)) ++triplet_mismatch;
    for (std::size_t a = 0; a < b; ++a) {
      for (std::size_t p = 0; p < b; ++p) {
        if (a == p || y[a] != y[p]) continue;
        ++pairs;
        if (hard_rank(dist, y, a, p) != testing::brute_hard_rank(naive, y, a, p)) ++rank_mismatch;
        for (std::size_t q = 0; q < b; ++q) ties += y[q] != y[a] && naive(a, q) == naive(a, p);
      }
    }
  }
  return {triplet_mismatch == 0 && rank_mismatch == 0,
          "200 batches: " + std::to_string(triplet_mismatch) + " triplet-set mismatches, " +
              std::to_string(rank_mismatch) + "/" + std::to_string(pairs) + " hard-rank mismatches (" +
              std::to_string(ties) + " tied negatives exercised)"};
}

Outcome relaxation_limit() {
  // Distances are a shuffled ladder L + 1e-2 * k, so every pair of distances
  // differs by at least 1e-2; values in [L, 2L] satisfy the triangle
  // inequality.
  constexpr double kTau = 1e-3, kGap = 1e-2;
  std::mt19937_64 gen(303);
  double worst = 0.0;
  std::size_t pairs = 0;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t b = 4 + gen() % 17;
    const auto y = random_labels(b, gen);
    const std::size_t m = b * (b - 1) / 2;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    const double base = kGap * static_cast<double>(m);
    Tensor<double> table({b, b});
    std::size_t k = 0;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = i + 1; j < b; ++j) {
        table(i, j) = table(j, i) = base + kGap * static_cast<double>(order[k++]);
      }
    }
    const auto dist = distance_matrix_from(table);
    for (std::size_t a = 0; a < b; ++a) {
      for (std::size_t p = 0; p < b; ++p) {
        if (a == p || y[a] != y[p]) continue;
        ++pairs;
        const double soft = soft_rank(dist, y, a, p, NegativeDomain::all, kTau);
        worst = std::max(worst, std::abs(soft - static_cast<double>(hard_rank(dist, y, a, p))));
      }
    }
  }
  const double floor = testing::logistic(-kGap / kTau);
  return {worst <= 1e-6, "100 batches, " + std::to_string(pairs) + " pairs, tau 1e-3: max |soft - hard| = " +
                             fmt(worst) + ", limit 1e-6 (one neighbour at the minimum gap alone contributes " +
                             "sigma(-gap/tau) = " + fmt(floor) + ")"};
}

Outcome loss_properties() {
  std::mt19937_64 gen(404);
  bool bounded = true;
  std::size_t checked = 0;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t b = 4 + gen() % 17, d = 1 + gen() % 8;
    const auto y = random_labels(b, gen);
    const auto z = random_tensor({b, d}, gen, -3.0, 3.0);
    for (const auto& r : rank_loss(z, y).ranks) {
      const double v = std::atan(r.soft);
      bounded = bounded && v >= 0.0 && v < std::numbers::pi / 2.0;
      ++checked;
    }
  }

  // Classes on separate far-apart axes with small intra-class spread.
  bool zero = true, all_tiny = true;
  double largest_sigma = 0.0;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t b = 4 + gen() % 17, d = 4 + gen() % 5;
    const auto y = random_labels(b, gen);
    auto z = random_tensor({b, d}, gen, -0.5, 0.5);
    for (std::size_t i = 0; i < b; ++i) z(i, static_cast<std::size_t>(y[i])) += 1000.0;
    const auto naive = testing::naive_distances(z);
    for (std::size_t a = 0; a < b; ++a)
      for (std::size_t p = 0; p < b; ++p)
        for (std::size_t q = 0; q < b; ++q)
          if (a != p && y[a] == y[p] && y[q] != y[a]) {
            largest_sigma = std::max(largest_sigma, testing::logistic(naive(a, p) - naive(a, q)));
          }
    all_tiny = all_tiny && largest_sigma < 1e-9;
    zero = zero && rank_loss(z, y).loss == 0.0;
  }

  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 4 + gen() % 17, d = 1 + gen() % 8;
    const auto y = random_labels(b, gen);
    auto z = random_tensor({b, d}, gen);
    std::size_t a = 0, p = 0, n = 0;
    do {
      a = gen() % b;
      p = gen() % b;
    } while (a == p || y[a] != y[p]);
    do n = gen() % b;
    while (y[n] == y[a]);
    const double before = soft_rank(pairwise_distances(z), y, a, p);
    const double t = std::uniform_real_distribution<double>(0.05, 0.95)(gen);
    for (std::size_t k = 0; k < d; ++k) z(n, k) += t * (z(a, k) - z(n, k));
    if (soft_rank(pairwise_distances(z), y, a, p) < before) ++violations;
  }

  return {bounded && zero && all_tiny && violations == 0,
          "arctan(R) in [0, pi/2) on " + std::to_string(checked) + " pairs: " + (bounded ? "yes" : "no") +
              "; separated batches: max sigma " + fmt(largest_sigma) + ", loss exactly 0: " +
              (zero ? "yes" : "no") + "; monotonicity violations " + std::to_string(violations) + "/100"};
}

struct SplitFiles {
  fs::path train;
  fs::path test;
  std::string source;
};

RunConfig pipeline_config(const SplitFiles& files, const fs::path& out) {
  RunConfig c;
  c.train_path = files.train;
  c.test_path = files.test;
  c.output_dir = out;
  return c;
}

Outcome sine_end_to_end() {
  const Stopwatch watch;
  const fs::path dir = work_dir("sines");
  SineSpec spec;
  spec.length = 64;
  spec.per_class = 20;
  spec.noise = 0.1;
  spec.frequencies = {1.0, 2.0, 4.0};
  save_delimited(make_sines(spec, 11), dir / "train.tsv");
  save_delimited(make_sines(spec, 12), dir / "test.tsv");
  RunConfig c = pipeline_config({dir / "train.tsv", dir / "test.tsv", ""}, dir / "out");
  c.num_augments = 5;
  const auto report = cmd_pipeline(c);
  const double secs = watch.seconds();
  return {report.accuracy >= 0.95 && secs < 300.0,
          "mean test accuracy " + fmt(report.accuracy) + " over 5 seeds, floor 0.95; " + fmt(secs) +
              " s, limit 300 s"};
}

SplitFiles control_split() {
  if (const char* root = std::getenv("RANKSCL_UCR_DIR")) {
    const fs::path base = fs::path(root) / "SyntheticControl";
    const fs::path train = base / "SyntheticControl_TRAIN.tsv", test = base / "SyntheticControl_TEST.tsv";
    if (fs::exists(train) && fs::exists(test)) return {train, test, "archive files " + base.string()};
  }
  const fs::path dir = work_dir("control-data");
  const auto [train, test] = make_control_chart_split(2024);
  save_delimited(train, dir / "train.tsv");
  save_delimited(test, dir / "test.tsv");
  return {dir / "train.tsv", dir / "test.tsv", "generated control-chart split (archive not found)"};
}

Outcome archive_spot_check() {
  const Stopwatch watch;
  const SplitFiles files = control_split();
  const auto report = cmd_pipeline(pipeline_config(files, work_dir("control")));
  const double secs = watch.seconds();
  return {report.accuracy >= 0.90 && secs < 1200.0,
          files.source + ": mean test accuracy " + fmt(report.accuracy) + " over 5 seeds, floor 0.90; " +
              fmt(secs) + " s, limit 1200 s"};
}

Outcome augmentation_ablation() {
  const SplitFiles files = control_split();
  const fs::path dir = work_dir("ablation");
  std::map<std::size_t, double> acc;
  for (std::size_t m : {0u, 5u}) {
    RunConfig c = pipeline_config(files, dir / ("m" + std::to_string(m)));
    c.epochs = 20;
    c.seeds = {0, 1, 2};
    c.num_augments = m;
    acc[m] = cmd_pipeline(c).accuracy;
  }
  return {acc[5] >= acc[0], files.source + ", 20 epochs, 3 seeds: accuracy m=5 " + fmt(acc[5]) + " vs m=0 " +
                                fmt(acc[0])};
}

Outcome svm_solver() {
  std::mt19937_64 gen(808);
  const SmoOptions opts;
  double worst = 0.0, worst_kkt = 0.0;
  std::size_t unconverged = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + gen() % 27, d = 1 + gen() % 4;
    const auto x = random_tensor({n, d}, gen);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = gen() % 2 ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const double C = std::array<double, 4>{0.1, 1.0, 10.0, 100.0}[trial % 4];
    const double gamma = std::uniform_real_distribution<double>(0.2, 2.0)(gen);
    const auto K = rbf_kernel(x, x, gamma);
    const auto sol = solve_smo(K, {}, y, C, opts);
    unconverged += sol.converged ? 0 : 1;
    const double w_smo = dual_objective(K, y, sol.alpha);
    const double w_ref = dual_objective(K, y, testing::projected_gradient_dual(K, y, C));
    worst = std::max(worst, std::abs(w_smo - w_ref) / std::abs(w_ref));
    for (std::size_t i = 0; i < n; ++i) {
      double f = sol.bias;
      for (std::size_t j = 0; j < n; ++j) f += sol.alpha[j] * y[j] * K(j, i);
      const double margin = y[i] * f;
      double residual = 0.0;
      if (sol.alpha[i] <= 1e-10 * C) residual = std::max(0.0, 1.0 - margin);
      else if (sol.alpha[i] >= C * (1.0 - 1e-10)) residual = std::max(0.0, margin - 1.0);
      else residual = std::abs(margin - 1.0);
      worst_kkt = std::max(worst_kkt, residual);
    }
  }

  const auto xor_x = Tensor<double>::from({4, 2}, {0, 0, 1, 1, 0, 1, 1, 0});
  const std::vector<int> xor_y{0, 0, 1, 1};
  const auto model = svm_fit_ovr(xor_x, xor_y, 100.0, 1.0, opts);
  const auto pred = predict(model, xor_x);
  const double xor_acc = metrics(xor_y, pred).accuracy;

  return {worst <= 1e-3 && xor_acc == 1.0 && worst_kkt <= 10.0 * opts.tol && unconverged == 0,
          "50 problems: max relative dual gap " + fmt(worst) + " (limit 1e-3), max KKT residual " +
              fmt(worst_kkt) + " (limit " + fmt(10.0 * opts.tol) + "), unconverged " +
              std::to_string(unconverged) + "; XOR training accuracy " + fmt(xor_acc)};
}

Outcome metrics_case() {
  const auto r = metrics({0, 0, 1, 1}, {0, 1, 1, 1});
  const bool ok = r.accuracy == 0.75 && std::abs(r.macro_precision - 0.83333) <= 1e-5 &&
                  r.macro_recall == 0.75 && std::abs(r.macro_f1 - 0.73333) <= 1e-5;
  return {ok, "accuracy " + fmt(r.accuracy) + ", macro precision " + fmt(r.macro_precision) +
                  ", macro recall " + fmt(r.macro_recall) + ", macro F1 " + fmt(r.macro_f1)};
}

Outcome determinism() {
  const fs::path dir = work_dir("determinism");
  SineSpec spec;
  spec.per_class = 10;
  save_delimited(make_sines(spec, 21), dir / "train.tsv");
  save_delimited(make_sines(spec, 22), dir / "test.tsv");
  auto run = [&](const std::string& name) {
    RunConfig c = pipeline_config({dir / "train.tsv", dir / "test.tsv", ""}, dir / name);
    c.epochs = 3;
    c.seeds = {5};
    cmd_pipeline(c);
  };
  run("a");
  run("b");
  std::vector<std::string> differing;
  for (const char* f : {"seed-5/model.rscl", "seed-5/train_repr.txt", "seed-5/test_repr.txt",
                        "seed-5/metrics.json", "metrics.json"}) {
    if (slurp(dir / "a" / f) != slurp(dir / "b" / f) || slurp(dir / "a" / f).empty()) differing.push_back(f);
  }

  const Checkpoint original = load_checkpoint(dir / "a" / "seed-5" / "model.rscl");
  save_checkpoint(original, dir / "copy.rscl");
  const Checkpoint copy = load_checkpoint(dir / "copy.rscl");
  const auto data = load_dataset(dir / "test.tsv", DataFormat::delimited);
  const bool same_eval = bitwise_equal(encode_series(original, data), encode_series(copy, data));
  const bool same_bytes = slurp(dir / "copy.rscl") == slurp(dir / "a" / "seed-5" / "model.rscl");

  std::string diff = differing.empty() ? "none" : "";
  for (const auto& f : differing) diff += (diff.empty() ? "" : ", ") + f;
  return {differing.empty() && same_eval && same_bytes,
          "rerun differences: " + diff + "; checkpoint round trip eval outputs bitwise equal: " +
              (same_eval ? "yes" : "no") + ", bytes equal: " + (same_bytes ? "yes" : "no")};
}

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "gradient suite", gradient_suite},
      {2, "rank oracle suite", rank_oracle_suite},
      {3, "sigmoid relaxation limit", relaxation_limit},
      {4, "loss properties", loss_properties},
      {5, "synthetic sines end to end", sine_end_to_end},
      {6, "SyntheticControl spot check", archive_spot_check},
      {7, "augmentation ablation ordering", augmentation_ablation},
      {8, "SVM solver", svm_solver},
      {9, "metrics hand case", metrics_case},
      {10, "determinism and formats", determinism},
  };
  return all;
}

}  // namespace
}  // namespace rankscl

int main(int argc, char** argv) {
  CLI::App app{"RankSCL acceptance suite"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number (1-10); repeatable")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::set<int> wanted(selected.begin(), selected.end());
  int failures = 0;
  for (const auto& c : rankscl::criteria()) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    rankscl::Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
