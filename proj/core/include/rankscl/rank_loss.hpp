#pragma once

#include <compare>
#include <cstddef>
#include <vector>

#include "rankscl/tensor.hpp"

namespace rankscl {

// Which negatives enter the relaxed rank of an (anchor, positive) pair.
enum class NegativeDomain {
  all,         // every sample with a different label
  valid_only,  // only negatives with d(a, n) < d(a, p)
};

enum class LossNormalization {
  mean,  // divide by the number of (anchor, positive) pairs
  sum,
};

struct RankLossConfig {
  NegativeDomain negative_domain = NegativeDomain::all;
  LossNormalization normalization = LossNormalization::mean;
  // sigma(k / temperature); 1 is the plain sigmoid.
  double temperature = 1.0;
};

inline constexpr double kDistanceEpsilon = 1e-12;

// Euclidean distances of a batch of embeddings, always in double precision.
// d_sq comes from the Gram identity clamped at zero;
// d = sqrt(d_sq + eps) - sqrt(eps) keeps the gradient finite at d = 0.
struct DistanceMatrix {
  Tensor<double> d;
  Tensor<double> d_sq;

  std::size_t size() const { return d.empty() ? 0 : d.dim(0); }
  double operator()(std::size_t i, std::size_t j) const { return d(i, j); }
};

template <typename T>
DistanceMatrix pairwise_distances(const Tensor<T>& z);

// Builds a DistanceMatrix directly from a symmetric distance table (tests
// and hand-constructed cases).
DistanceMatrix distance_matrix_from(const Tensor<double>& d);

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

using TripletSet = std::vector<Triplet>;

// {(a, p, n) : y_a = y_p, a != p, y_n != y_a, d(a, n) < d(a, p)} in
// lexicographic order.
TripletSet valid_triplets(const DistanceMatrix& dist, const std::vector<int>& labels);

// |{n : y_n != y_a, d(a, n) <= d(a, p)}|. Throws ContractError unless
// y_a == y_p and a != p.
std::size_t hard_rank(const DistanceMatrix& dist, const std::vector<int>& labels, std::size_t a,
                      std::size_t p);

// Sum over negatives of sigma((d(a, p) - d(a, n)) / temperature).
double soft_rank(const DistanceMatrix& dist, const std::vector<int>& labels, std::size_t a,
                 std::size_t p, NegativeDomain domain = NegativeDomain::all,
                 double temperature = 1.0);

struct PairRank {
  std::size_t anchor;
  std::size_t positive;
  double soft;
  std::size_t hard;
};

template <typename T>
struct RankComputation {
  std::vector<PairRank> ranks;  // one entry per (anchor, positive) pair, lexicographic
  double loss = 0.0;
  Tensor<T> grad_z;  // dL/dz, same shape as z
  std::size_t num_pairs = 0;
};

// L = (1/P) sum_{(a,p)} arctan(R(a, p)) (or the plain sum), with its exact
// gradient through arctan, sigmoid, distances and the Gram identity.
// Returns zero loss and gradient when no pair exists. Throws NumericError
// for non-finite z.
template <typename T>
RankComputation<T> rank_loss(const Tensor<T>& z, const std::vector<int>& labels,
                             const RankLossConfig& config = {});

}  // namespace rankscl
