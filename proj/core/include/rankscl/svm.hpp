#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "rankscl/tensor.hpp"

namespace rankscl {

// K[i, j] = exp(-gamma * ||a_i - b_j||^2)
Tensor<double> rbf_kernel(const Tensor<double>& a, const Tensor<double>& b, double gamma);

// gamma = 1 / (D * var(reps)), variance over all entries. Falls back to 1/D
// for constant input.
double default_gamma(const Tensor<double>& reps);

struct SmoOptions {
  // Stop once the maximal KKT violation m(alpha) - M(alpha) drops below tol.
  double tol = 1e-3;
  std::size_t max_iterations = 10'000'000;
};

struct SmoSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// SMO on the soft-margin dual with a precomputed kernel matrix (over the
// rows listed in `rows`, or all rows when empty). Each step updates the
// maximal violating index and the partner with the best second-order gain
// (Fan, Chen and Lin working-set selection).
SmoSolution solve_smo(const Tensor<double>& kernel, const std::vector<std::size_t>& rows,
                      const std::vector<int>& y, double C, const SmoOptions& options = {});

// W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
double dual_objective(const Tensor<double>& kernel, const std::vector<int>& y,
                      const std::vector<double>& alpha);

struct BinarySvm {
  Tensor<double> support_vectors;  // [S, D]
  std::vector<double> dual_coef;   // alpha_i * y_i per support vector
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;
  std::vector<double> alpha;       // all training multipliers, for diagnostics
  bool converged = false;

  // f(x) = sum alpha_i y_i K(x_i, x) + b, one value per row.
  std::vector<double> decision(const Tensor<double>& reps) const;
};

// y in {-1, +1}. Throws ContractError when only one class is present.
BinarySvm svm_fit_binary(const Tensor<double>& reps, const std::vector<int>& y, double C,
                         double gamma, const SmoOptions& options = {});

inline constexpr double kInfinitePenalty = 1e8;

// {1e-4, ..., 1e4, inf}; inf is realized as kInfinitePenalty.
std::vector<double> default_c_grid();

struct SelectOptions {
  std::vector<double> c_grid = default_c_grid();
  std::optional<double> gamma;  // default_gamma(train) when unset
  std::size_t folds = 5;
  SmoOptions smo;
};

struct GridScore {
  double C;
  double cv_accuracy;
};

// One-vs-rest multiclass model over contiguous class ids.
struct SvmModel {
  std::vector<BinarySvm> machines;  // one per class, in class order
  std::vector<int> classes;
  double gamma = 1.0;
  double C = 1.0;
  std::size_t dim = 0;
  std::vector<GridScore> cv_scores;
};

// Chooses C by stratified k-fold accuracy on the training representations
// (ties toward the smaller C), then refits on all of them.
SvmModel svm_fit_select(const Tensor<double>& train_reps, const std::vector<int>& train_labels,
                        const SelectOptions& options = {});

// Fits one OvR model with fixed C and gamma.
SvmModel svm_fit_ovr(const Tensor<double>& train_reps, const std::vector<int>& train_labels,
                     double C, double gamma, const SmoOptions& options = {});

// Argmax of OvR decision values, ties toward the smaller class index.
std::vector<int> predict(const SvmModel& model, const Tensor<double>& reps);

}  // namespace rankscl
