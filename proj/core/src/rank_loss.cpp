#include "rankscl/rank_loss.hpp"

#include <cmath>
#include <map>
#include <string>

#include "eigen_maps.hpp"
#include "rankscl/errors.hpp"

namespace rankscl {

using detail::RowMatrix;

namespace {

double sigmoid(double k) {
  if (k >= 0.0) return 1.0 / (1.0 + std::exp(-k));
  const double e = std::exp(k);
  return e / (1.0 + e);
}

void check_labels(const DistanceMatrix& dist, const std::vector<int>& labels) {
  if (labels.size() != dist.size()) {
    throw DimensionError(std::to_string(labels.size()) + " labels for a " +
                         std::to_string(dist.size()) + "-point distance matrix");
  }
}

void check_pair(const DistanceMatrix& dist, const std::vector<int>& labels, std::size_t a,
                std::size_t p) {
  check_labels(dist, labels);
  if (a >= labels.size() || p >= labels.size()) throw ContractError("pair index out of range");
  if (a == p) throw ContractError("anchor and positive must differ");
  if (labels[a] != labels[p]) {
    throw ContractError("anchor " + std::to_string(a) + " and positive " + std::to_string(p) +
                        " have different labels");
  }
}

}  // namespace

template <typename T>
DistanceMatrix pairwise_distances(const Tensor<T>& z) {
  require_rank(z, 2, "pairwise_distances z");
  const auto rows = static_cast<Eigen::Index>(z.dim(0));
  const auto cols = static_cast<Eigen::Index>(z.dim(1));
  const RowMatrix<double> zd = detail::as_matrix(z, rows, cols).template cast<double>();
  const RowMatrix<double> gram = zd * zd.transpose();

  const std::size_t n = z.dim(0);
  DistanceMatrix dist{Tensor<double>({n, n}), Tensor<double>({n, n})};
  const double root_eps = std::sqrt(kDistanceEpsilon);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double sq = std::max(0.0, gram(ii, ii) + gram(jj, jj) - 2.0 * gram(ii, jj));
      const double d = std::sqrt(sq + kDistanceEpsilon) - root_eps;
      dist.d_sq(i, j) = dist.d_sq(j, i) = sq;
      dist.d(i, j) = dist.d(j, i) = d;
    }
  }
  return dist;
}

DistanceMatrix distance_matrix_from(const Tensor<double>& d) {
  require_rank(d, 2, "distance table");
  if (d.dim(0) != d.dim(1)) throw DimensionError("distance table must be square");
  DistanceMatrix dist{d, Tensor<double>(d.shape())};
  for (std::size_t i = 0; i < d.size(); ++i) dist.d_sq[i] = d[i] * d[i];
  return dist;
}

TripletSet valid_triplets(const DistanceMatrix& dist, const std::vector<int>& labels) {
  check_labels(dist, labels);
  const std::size_t n = labels.size();
  TripletSet out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double d_ap = dist(a, p);
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] != labels[a] && dist(a, q) < d_ap) out.push_back({a, p, q});
      }
    }
  }
  return out;
}

std::size_t hard_rank(const DistanceMatrix& dist, const std::vector<int>& labels, std::size_t a,
                      std::size_t p) {
  check_pair(dist, labels, a, p);
  const double d_ap = dist(a, p);
  std::size_t rank = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] != labels[a] && dist(a, n) <= d_ap) ++rank;
  }
  return rank;
}

double soft_rank(const DistanceMatrix& dist, const std::vector<int>& labels, std::size_t a,
                 std::size_t p, NegativeDomain domain, double temperature) {
  check_pair(dist, labels, a, p);
  if (!(temperature > 0.0)) throw ContractError("temperature must be > 0");
  const double d_ap = dist(a, p);
  double rank = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] == labels[a]) continue;
    const double d_an = dist(a, n);
    if (domain == NegativeDomain::valid_only && !(d_an < d_ap)) continue;
    rank += sigmoid((d_ap - d_an) / temperature);
  }
  return rank;
}

template <typename T>
RankComputation<T> rank_loss(const Tensor<T>& z, const std::vector<int>& labels,
                             const RankLossConfig& config) {
  require_rank(z, 2, "rank_loss z");
  const std::size_t n = z.dim(0), dim = z.dim(1);
  if (labels.size() != n) {
    throw DimensionError("rank_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " embeddings");
  }
  if (!z.all_finite()) throw NumericError("rank_loss: embeddings contain NaN/Inf");
  if (!(config.temperature > 0.0)) throw ConfigError("rank_loss: temperature must be > 0");

  RankComputation<T> out;
  out.grad_z = Tensor<T>(z.shape());

  // Members of each class; negatives of an anchor are all other rows.
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  std::size_t pairs = 0;
  for (const auto& [label, rows] : members) pairs += rows.size() * (rows.size() - 1);
  out.num_pairs = pairs;
  if (pairs == 0) return out;

  const DistanceMatrix dist = pairwise_distances(z);
  const double tau = config.temperature;
  const double weight =
      config.normalization == LossNormalization::mean ? 1.0 / static_cast<double>(pairs) : 1.0;
  const bool valid_only = config.negative_domain == NegativeDomain::valid_only;

  // dL/dd(a, j), accumulated with the anchor as the row.
  RowMatrix<double> grad_d = RowMatrix<double>::Zero(static_cast<Eigen::Index>(n),
                                                     static_cast<Eigen::Index>(n));
  out.ranks.reserve(pairs);
  double loss = 0.0;

  std::vector<std::size_t> negatives;
  std::vector<double> d_neg, exp_neg, terms;
  for (std::size_t a = 0; a < n; ++a) {
    negatives.clear();
    d_neg.clear();
    double row_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_max = std::max(row_max, dist(a, j));
      if (labels[j] != labels[a]) {
        negatives.push_back(j);
        d_neg.push_back(dist(a, j));
      }
    }
    const std::size_t m = negatives.size();
    terms.resize(m);
    // sigma((d_ap - d_an)/tau) = 1 / (1 + exp(d_an/tau) * exp(-d_ap/tau)) when
    // both factors stay in range; otherwise evaluate each sigmoid directly.
    const bool factored = row_max / tau <= 600.0;
    if (factored) {
      exp_neg.resize(m);
      for (std::size_t k = 0; k < m; ++k) exp_neg[k] = std::exp(d_neg[k] / tau);
    }

    for (std::size_t p : members[labels[a]]) {
      if (p == a) continue;
      const double d_ap = dist(a, p);
      double rank = 0.0;
      std::size_t hard = 0;
      if (factored) {
        const double e_p = std::exp(-d_ap / tau);
        for (std::size_t k = 0; k < m; ++k) {
          terms[k] = 1.0 / (1.0 + exp_neg[k] * e_p);
        }
      } else {
        for (std::size_t k = 0; k < m; ++k) terms[k] = sigmoid((d_ap - d_neg[k]) / tau);
      }
      for (std::size_t k = 0; k < m; ++k) {
        const bool closer = d_neg[k] <= d_ap;
        hard += closer ? 1 : 0;
        if (valid_only && !(d_neg[k] < d_ap)) terms[k] = 0.0;
        rank += terms[k];
      }
      loss += std::atan(rank);
      out.ranks.push_back({a, p, rank, hard});

      // dL/dR = weight / (1 + R^2); dR/dd_ap = sum sigma'/tau, dR/dd_an = -sigma'/tau.
      const double coef = weight / (1.0 + rank * rank) / tau;
      double total = 0.0;
      auto row = grad_d.row(static_cast<Eigen::Index>(a));
      for (std::size_t k = 0; k < m; ++k) {
        const double s = terms[k];
        const double ds = coef * s * (1.0 - s);
        total += ds;
        row(static_cast<Eigen::Index>(negatives[k])) -= ds;
      }
      row(static_cast<Eigen::Index>(p)) += total;
    }
  }
  out.loss = loss * weight;

  // Chain through d = sqrt(d_sq + eps) - sqrt(eps) and d_sq = |z_i|^2 + |z_j|^2 - 2 z_i.z_j.
  RowMatrix<double> sym(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double sq = dist.d_sq(i, j);
      const bool live = i != j && sq > 0.0;
      sym(ii, jj) = live ? (grad_d(ii, jj) + grad_d(jj, ii)) / (2.0 * std::sqrt(sq + kDistanceEpsilon))
                         : 0.0;
    }
  }
  const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(dim);
  const RowMatrix<double> zd = detail::as_matrix(z, rows, cols).template cast<double>();
  RowMatrix<double> grad = 2.0 * (sym.rowwise().sum().asDiagonal() * zd - sym * zd);
  for (std::size_t i = 0; i < out.grad_z.size(); ++i) {
    out.grad_z[i] = static_cast<T>(grad.data()[i]);
  }
  return out;
}

template DistanceMatrix pairwise_distances(const Tensor<float>&);
template DistanceMatrix pairwise_distances(const Tensor<double>&);
template RankComputation<float> rank_loss(const Tensor<float>&, const std::vector<int>&,
                                          const RankLossConfig&);
template RankComputation<double> rank_loss(const Tensor<double>&, const std::vector<int>&,
                                           const RankLossConfig&);

}  // namespace rankscl
