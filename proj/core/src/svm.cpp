#include "rankscl/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "rankscl/errors.hpp"

namespace rankscl {
namespace {

double sq_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// Multipliers and gradient cache of one SMO run over `rows` of `kernel`,
// minimizing 1/2 a'Qa - sum a with Q_ij = y_i y_j K_ij.
class SmoSolver {
 public:
  SmoSolver(const Tensor<double>& kernel, const std::vector<std::size_t>& rows,
            const std::vector<int>& y, double C)
      : kernel_(kernel), rows_(rows), y_(y), C_(C), alpha_(rows.size(), 0.0),
        grad_(rows.size(), -1.0) {}

  SmoSolution run(const SmoOptions& options) {
    SmoSolution sol;
    while (sol.iterations < options.max_iterations) {
      std::size_t i = 0, j = 0;
      if (!select(options.tol, i, j)) {
        sol.converged = true;
        break;
      }
      update(i, j);
      ++sol.iterations;
    }
    sol.alpha = alpha_;
    sol.bias = -rho();
    return sol;
  }

 private:
  static constexpr double kTau = 1e-12;

  double k(std::size_t i, std::size_t j) const { return kernel_(rows_[i], rows_[j]); }
  bool at_upper(std::size_t t) const { return alpha_[t] >= C_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }
  bool in_up(std::size_t t) const { return y_[t] > 0 ? !at_upper(t) : !at_lower(t); }
  bool in_low(std::size_t t) const { return y_[t] > 0 ? !at_lower(t) : !at_upper(t); }

  bool select(double tol, std::size_t& i, std::size_t& j) const {
    const std::size_t n = rows_.size();
    double g_max = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y_[t] * grad_[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
        found = true;
      }
    }
    if (!found) return false;

    double g_min = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    bool paired = false;
    const double k_ii = k(i, i);
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y_[t] * grad_[t];
      g_min = std::min(g_min, v);
      const double diff = g_max - v;
      if (diff <= 0.0) continue;
      double quad = k_ii + k(t, t) - 2.0 * k(i, t);
      if (quad <= 0.0) quad = kTau;
      const double gain = -(diff * diff) / quad;
      if (gain < best) {
        best = gain;
        j = t;
        paired = true;
      }
    }
    return paired && g_max - g_min >= tol;
  }

  void update(std::size_t i, std::size_t j) {
    const double a_i = alpha_[i], a_j = alpha_[j];
    double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
    if (quad <= 0.0) quad = kTau;
    double new_i, new_j;
    if (y_[i] != y_[j]) {
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = a_i - a_j;
      new_i = a_i + delta;
      new_j = a_j + delta;
      if (diff > 0.0) {
        if (new_j < 0.0) {
          new_j = 0.0;
          new_i = diff;
        }
        if (new_i > C_) {
          new_i = C_;
          new_j = C_ - diff;
        }
      } else {
        if (new_i < 0.0) {
          new_i = 0.0;
          new_j = -diff;
        }
        if (new_j > C_) {
          new_j = C_;
          new_i = C_ + diff;
        }
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = a_i + a_j;
      new_i = a_i - delta;
      new_j = a_j + delta;
      if (sum > C_) {
        if (new_i > C_) {
          new_i = C_;
          new_j = sum - C_;
        }
        if (new_j > C_) {
          new_j = C_;
          new_i = sum - C_;
        }
      } else {
        if (new_j < 0.0) {
          new_j = 0.0;
          new_i = sum;
        }
        if (new_i < 0.0) {
          new_i = 0.0;
          new_j = sum;
        }
      }
    }
    alpha_[i] = new_i;
    alpha_[j] = new_j;
    const double d_i = (new_i - a_i) * y_[i], d_j = (new_j - a_j) * y_[j];
    for (std::size_t t = 0; t < rows_.size(); ++t) {
      grad_[t] += y_[t] * (d_i * k(i, t) + d_j * k(j, t));
    }
  }

  // Threshold from the free multipliers, or the middle of the feasible
  // interval when every multiplier sits at a bound.
  double rho() const {
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < rows_.size(); ++t) {
      const double yg = y_[t] * grad_[t];
      if (at_upper(t)) {
        if (y_[t] < 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else if (at_lower(t)) {
        if (y_[t] > 0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else {
        sum += yg;
        ++free;
      }
    }
    return free > 0 ? sum / static_cast<double>(free) : 0.5 * (upper + lower);
  }

  const Tensor<double>& kernel_;
  const std::vector<std::size_t>& rows_;
  const std::vector<int>& y_;
  double C_;
  std::vector<double> alpha_;
  std::vector<double> grad_;  // (Q alpha)_t - 1
};

std::vector<int> binary_targets(const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                                int positive) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(labels[r] == positive ? 1 : -1);
  return y;
}

BinarySvm make_machine(const Tensor<double>& reps, const std::vector<std::size_t>& rows,
                       const std::vector<int>& y, const SmoSolution& sol, double C, double gamma) {
  BinarySvm m;
  m.gamma = gamma;
  m.C = C;
  m.bias = sol.bias;
  m.alpha = sol.alpha;
  m.converged = sol.converged;
  const std::size_t dim = reps.dim(1);
  std::vector<double> sv;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (sol.alpha[i] <= 0.0) continue;
    const double* src = reps.raw() + rows[i] * dim;
    sv.insert(sv.end(), src, src + dim);
    m.dual_coef.push_back(sol.alpha[i] * y[i]);
  }
  m.support_vectors = Tensor<double>({m.dual_coef.size(), dim}, std::move(sv));
  return m;
}

std::vector<int> distinct_classes(const std::vector<int>& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

double realize_penalty(double c) { return std::isinf(c) ? kInfinitePenalty : c; }

}  // namespace

Tensor<double> rbf_kernel(const Tensor<double>& a, const Tensor<double>& b, double gamma) {
  require_rank(a, 2, "rbf_kernel a");
  require_rank(b, 2, "rbf_kernel b");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("rbf_kernel: dimension " + std::to_string(a.dim(1)) + " vs " +
                         std::to_string(b.dim(1)));
  }
  if (!(gamma > 0.0)) throw ContractError("rbf_kernel: gamma must be > 0");
  const std::size_t na = a.dim(0), nb = b.dim(0), dim = a.dim(1);
  Tensor<double> k({na, nb});
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      k(i, j) = std::exp(-gamma * sq_distance(a.raw() + i * dim, b.raw() + j * dim, dim));
    }
  }
  return k;
}

double default_gamma(const Tensor<double>& reps) {
  require_rank(reps, 2, "default_gamma reps");
  const std::size_t dim = reps.dim(1);
  if (reps.size() == 0 || dim == 0) throw DimensionError("default_gamma: empty representations");
  const auto v = reps.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return var > 0.0 ? 1.0 / (static_cast<double>(dim) * var) : 1.0 / static_cast<double>(dim);
}

SmoSolution solve_smo(const Tensor<double>& kernel, const std::vector<std::size_t>& rows,
                      const std::vector<int>& y, double C, const SmoOptions& options) {
  require_rank(kernel, 2, "solve_smo kernel");
  if (!(C > 0.0)) throw ContractError("SVM penalty C must be > 0");
  std::vector<std::size_t> all;
  const std::vector<std::size_t>* use = &rows;
  if (rows.empty()) {
    all.resize(kernel.dim(0));
    std::iota(all.begin(), all.end(), std::size_t{0});
    use = &all;
  }
  if (y.size() != use->size()) throw DimensionError("solve_smo: one target per row required");
  SmoSolver solver(kernel, *use, y, C);
  return solver.run(options);
}

double dual_objective(const Tensor<double>& kernel, const std::vector<int>& y,
                      const std::vector<double>& alpha) {
  const std::size_t n = alpha.size();
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alpha[i];
    for (std::size_t j = 0; j < n; ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(i, j);
  }
  return linear - 0.5 * quad;
}

std::vector<double> BinarySvm::decision(const Tensor<double>& reps) const {
  const Tensor<double> k = rbf_kernel(reps, support_vectors, gamma);
  std::vector<double> out(reps.dim(0), bias);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t s = 0; s < dual_coef.size(); ++s) out[i] += dual_coef[s] * k(i, s);
  }
  return out;
}

BinarySvm svm_fit_binary(const Tensor<double>& reps, const std::vector<int>& y, double C,
                         double gamma, const SmoOptions& options) {
  require_rank(reps, 2, "svm_fit_binary reps");
  if (y.size() != reps.dim(0)) throw DimensionError("svm_fit_binary: one target per row required");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) {
      pos = true;
    } else if (v == -1) {
      neg = true;
    } else {
      throw ContractError("svm_fit_binary: targets must be +1 or -1");
    }
  }
  if (!pos || !neg) throw ContractError("svm_fit_binary: both classes must be present");
  const Tensor<double> kernel = rbf_kernel(reps, reps, gamma);
  std::vector<std::size_t> rows(reps.dim(0));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const SmoSolution sol = solve_smo(kernel, rows, y, C, options);
  return make_machine(reps, rows, y, sol, C, gamma);
}

std::vector<double> default_c_grid() {
  std::vector<double> grid;
  for (int i = -4; i <= 4; ++i) grid.push_back(std::pow(10.0, i));
  grid.push_back(std::numeric_limits<double>::infinity());
  return grid;
}

namespace {

SvmModel fit_ovr_with_kernel(const Tensor<double>& reps, const std::vector<int>& labels,
                             const Tensor<double>& kernel, double C, double gamma,
                             const SmoOptions& options) {
  const std::vector<int> classes = distinct_classes(labels);
  if (classes.size() < 2) throw ContractError("SVM training needs at least two classes");
  std::vector<std::size_t> rows(reps.dim(0));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  SvmModel model;
  model.classes = classes;
  model.gamma = gamma;
  model.C = C;
  model.dim = reps.dim(1);
  for (int c : classes) {
    const std::vector<int> y = binary_targets(labels, rows, c);
    const SmoSolution sol = solve_smo(kernel, rows, y, C, options);
    model.machines.push_back(make_machine(reps, rows, y, sol, C, gamma));
  }
  return model;
}

// Mean fold accuracy of OvR machines trained on the complementary folds.
double cross_validate(const Tensor<double>& kernel, const std::vector<int>& labels,
                      const std::vector<std::size_t>& fold_of, std::size_t folds,
                      const std::vector<int>& classes, double C, const SmoOptions& options) {
  double total = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    std::vector<double> best(test.size(), -std::numeric_limits<double>::infinity());
    std::vector<int> pred(test.size(), classes.front());
    for (int c : classes) {
      const std::vector<int> y = binary_targets(labels, train, c);
      if (std::find(y.begin(), y.end(), 1) == y.end()) continue;
      const SmoSolution sol = solve_smo(kernel, train, y, C, options);
      for (std::size_t t = 0; t < test.size(); ++t) {
        double value = sol.bias;
        for (std::size_t s = 0; s < train.size(); ++s) {
          if (sol.alpha[s] > 0.0) value += sol.alpha[s] * y[s] * kernel(test[t], train[s]);
        }
        if (value > best[t]) {
          best[t] = value;
          pred[t] = c;
        }
      }
    }
    std::size_t correct = 0;
    for (std::size_t t = 0; t < test.size(); ++t) correct += pred[t] == labels[test[t]] ? 1 : 0;
    total += test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return total / static_cast<double>(folds);
}

}  // namespace

SvmModel svm_fit_ovr(const Tensor<double>& train_reps, const std::vector<int>& train_labels,
                     double C, double gamma, const SmoOptions& options) {
  require_rank(train_reps, 2, "svm_fit_ovr reps");
  if (train_labels.size() != train_reps.dim(0)) {
    throw DimensionError("svm_fit_ovr: one label per row required");
  }
  const Tensor<double> kernel = rbf_kernel(train_reps, train_reps, gamma);
  return fit_ovr_with_kernel(train_reps, train_labels, kernel, realize_penalty(C), gamma, options);
}

SvmModel svm_fit_select(const Tensor<double>& train_reps, const std::vector<int>& train_labels,
                        const SelectOptions& options) {
  require_rank(train_reps, 2, "svm_fit_select reps");
  if (train_labels.size() != train_reps.dim(0)) {
    throw DimensionError("svm_fit_select: one label per row required");
  }
  if (options.c_grid.empty()) throw ConfigError("SVM C grid is empty");
  const double gamma = options.gamma ? *options.gamma : default_gamma(train_reps);
  const Tensor<double> kernel = rbf_kernel(train_reps, train_reps, gamma);
  const std::vector<int> classes = distinct_classes(train_labels);
  if (classes.size() < 2) throw ContractError("SVM training needs at least two classes");

  std::vector<double> grid;
  for (double c : options.c_grid) {
    if (!(c > 0.0)) throw ConfigError("SVM C values must be > 0");
    grid.push_back(realize_penalty(c));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::size_t min_count = train_labels.size();
  for (int c : classes) {
    min_count = std::min<std::size_t>(
        min_count, static_cast<std::size_t>(std::count(train_labels.begin(), train_labels.end(), c)));
  }
  const std::size_t folds = std::min(options.folds, min_count);

  double chosen = grid.front();
  std::vector<GridScore> scores;
  if (grid.size() > 1) {
    if (folds < 2) {
      chosen = 1.0;
    } else {
      // Stratified: the k-th member of each class goes to fold k mod folds.
      std::vector<std::size_t> fold_of(train_labels.size());
      for (int c : classes) {
        std::size_t seen = 0;
        for (std::size_t i = 0; i < train_labels.size(); ++i) {
          if (train_labels[i] == c) fold_of[i] = seen++ % folds;
        }
      }
      double best = -1.0;
      for (double C : grid) {
        const double acc =
            cross_validate(kernel, train_labels, fold_of, folds, classes, C, options.smo);
        scores.push_back({C, acc});
        if (acc > best) {
          best = acc;
          chosen = C;
        }
      }
    }
  }
  SvmModel model = fit_ovr_with_kernel(train_reps, train_labels, kernel, chosen, gamma, options.smo);
  model.cv_scores = std::move(scores);
  return model;
}

std::vector<int> predict(const SvmModel& model, const Tensor<double>& reps) {
  require_rank(reps, 2, "predict reps");
  if (reps.dim(1) != model.dim) {
    throw DimensionError("predict: model trained on dimension " + std::to_string(model.dim) +
                         ", got " + std::to_string(reps.dim(1)));
  }
  const std::size_t n = reps.dim(0);
  std::vector<int> out(n, model.classes.empty() ? 0 : model.classes.front());
  std::vector<double> best(n, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < model.machines.size(); ++c) {
    const std::vector<double> values = model.machines[c].decision(reps);
    for (std::size_t i = 0; i < n; ++i) {
      if (values[i] > best[i]) {
        best[i] = values[i];
        out[i] = model.classes[c];
      }
    }
  }
  return out;
}

}  // namespace rankscl
