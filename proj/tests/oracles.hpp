#pragma once

#include <cmath>
#include <vector>

#include "rankscl/rank_loss.hpp"

// Brute-force reference implementations for the rank computations.
namespace rankscl::testing {

inline Tensor<double> naive_distances(const Tensor<double>& z) {
  const std::size_t n = z.dim(0), d = z.dim(1);
  Tensor<double> out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (z(i, k) - z(j, k)) * (z(i, k) - z(j, k));
      out(i, j) = std::sqrt(s);
    }
  }
  return out;
}

inline TripletSet brute_triplets(const Tensor<double>& d, const std::vector<int>& y) {
  TripletSet out;
  const std::size_t n = y.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (a != p && y[a] == y[p] && y[q] != y[a] && d(a, q) < d(a, p)) out.push_back({a, p, q});
  return out;
}

inline std::size_t brute_hard_rank(const Tensor<double>& d, const std::vector<int>& y, std::size_t a,
                                   std::size_t p) {
  std::size_t count = 0;
  for (std::size_t q = 0; q < y.size(); ++q)
    if (y[q] != y[a] && d(a, q) <= d(a, p)) ++count;
  return count;
}

inline double logistic(double k) { return 1.0 / (1.0 + std::exp(-k)); }

inline double brute_soft_rank(const Tensor<double>& d, const std::vector<int>& y, std::size_t a,
                              std::size_t p, bool valid_only = false, double tau = 1.0) {
  double r = 0.0;
  for (std::size_t q = 0; q < y.size(); ++q) {
    if (y[q] == y[a]) continue;
    if (valid_only && !(d(a, q) < d(a, p))) continue;
    r += logistic((d(a, p) - d(a, q)) / tau);
  }
  return r;
}

// Mean (or summed) arctan of the soft rank over all (anchor, positive) pairs.
inline double brute_loss(const Tensor<double>& z, const std::vector<int>& y, bool valid_only,
                         bool mean) {
  const Tensor<double> d = naive_distances(z);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < y.size(); ++a) {
    for (std::size_t p = 0; p < y.size(); ++p) {
      if (a == p || y[a] != y[p]) continue;
      total += std::atan(brute_soft_rank(d, y, a, p, valid_only));
      ++pairs;
    }
  }
  return mean && pairs > 0 ? total / static_cast<double>(pairs) : total;
}

}  // namespace rankscl::testing
