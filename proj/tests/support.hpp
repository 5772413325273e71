#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rankscl/tensor.hpp"

namespace rankscl::testing {

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& gen, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (double& v : t.values()) v = dist(gen);
  return t;
}

// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  return relative_error(a.values(), b.values());
}

// Central differences of a scalar function with respect to every entry of x.
inline Tensor<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f,
                                       const Tensor<double>& x, double h = 1e-6) {
  Tensor<double> grad(x.shape());
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double up = f(probe);
    probe[i] = keep - h;
    const double down = f(probe);
    probe[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// sum(w * t), the scalar used to turn tensor outputs into gradient checks.
inline double weighted_sum(const Tensor<double>& t, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rankscl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rankscl::testing
