#include "bandlime/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "bandlime/error.hpp"

namespace bandlime {

namespace {

// Cramer statistic of the split (first m indices vs the rest) over a pooled
// distance matrix.
double split_statistic(const Eigen::MatrixXd& dist, std::span<const std::size_t> order,
                       std::size_t m) {
  const std::size_t total = order.size();
  const std::size_t n = total - m;
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto a = static_cast<Eigen::Index>(order[i]);
    for (std::size_t j = i + 1; j < total; ++j) {
      const double v = dist(a, static_cast<Eigen::Index>(order[j]));
      if (j < m) {
        xx += v;
      } else if (i >= m) {
        yy += v;
      } else {
        xy += v;
      }
    }
  }
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  // Off-diagonal pairs were counted once; the full double sums count them twice.
  const double bracket = xy / (md * nd) - xx / (md * md) - yy / (nd * nd);
  return md * nd / (md + nd) * bracket;
}

Eigen::MatrixXd pooled_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::Index total = pooled.rows();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(total, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    for (Eigen::Index j = i + 1; j < total; ++j) {
      dist(i, j) = dist(j, i) = (pooled.row(i) - pooled.row(j)).norm();
    }
  }
  return dist;
}

// Fixed order for the two samples so that swapping them reproduces every
// floating-point operation.
bool swap_samples(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) return y.rows() < x.rows();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (x(i, k) != y(i, k)) return y(i, k) < x(i, k);
    }
  }
  return false;
}

void check_samples(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() < 1 || y.rows() < 1) throw InvalidArgument("both samples need at least one row");
  if (x.cols() != y.cols()) {
    throw InvalidArgument("samples differ in dimension: " + std::to_string(x.cols()) + " vs " +
                          std::to_string(y.cols()));
  }
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("samples must be finite");
}

}  // namespace

EmotionAggregate aggregate_matrix(const Eigen::MatrixXd& weights, const std::string& emotion,
                                  std::vector<std::string> sources) {
  if (weights.rows() == 0) throw InvalidArgument("no explanations to aggregate for " + emotion);
  EmotionAggregate agg;
  agg.emotion = emotion;
  agg.weights = weights;
  agg.sources = std::move(sources);
  const auto n = static_cast<double>(weights.rows());
  for (Eigen::Index k = 0; k < weights.cols(); ++k) {
    const double mean = weights.col(k).sum() / n;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
      ss += (weights(i, k) - mean) * (weights(i, k) - mean);
    }
    agg.mean_weights.push_back(mean);
    agg.std_weights.push_back(weights.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
  }
  return agg;
}

EmotionAggregate aggregate(std::span<const Explanation> explanations, const std::string& emotion) {
  if (explanations.empty()) throw InvalidArgument("no explanations to aggregate for " + emotion);
  const std::size_t d = explanations.front().n_components();
  Eigen::MatrixXd w(static_cast<Eigen::Index>(explanations.size()), static_cast<Eigen::Index>(d));
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const Explanation& e = explanations[i];
    if (e.n_components() != d) {
      throw InvalidArgument("explanations mix " + std::to_string(d) + " and " +
                            std::to_string(e.n_components()) + " components");
    }
    if (e.target_class != emotion) {
      throw InvalidArgument("explanation for '" + e.target_class + "' in the '" + emotion +
                            "' aggregate");
    }
    for (std::size_t k = 0; k < d; ++k) {
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = e.weights[k];
    }
    sources.push_back(e.source_path);
  }
  return aggregate_matrix(w, emotion, std::move(sources));
}

double cramer_statistic(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  check_samples(x, y);
  if (swap_samples(x, y)) return cramer_statistic(y, x);
  const Eigen::MatrixXd dist = pooled_distances(x, y);
  std::vector<std::size_t> order(static_cast<std::size_t>(dist.rows()));
  std::iota(order.begin(), order.end(), 0);
  return split_statistic(dist, order, static_cast<std::size_t>(x.rows()));
}

CramerResult cramer_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha,
                         std::size_t n_permutations, std::uint64_t seed) {
  check_samples(x, y);
  if (x.rows() < 2 || y.rows() < 2) {
    throw InvalidArgument("Cramer test needs at least two observations per sample");
  }
  if (n_permutations < 99) throw InvalidArgument("use at least 99 permutations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (swap_samples(x, y)) return cramer_test(y, x, alpha, n_permutations, seed);

  const Eigen::MatrixXd dist = pooled_distances(x, y);
  const auto m = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> identity(static_cast<std::size_t>(dist.rows()));
  std::iota(identity.begin(), identity.end(), 0);

  CramerResult result;
  result.alpha = alpha;
  result.n_permutations = n_permutations;
  result.statistic = split_statistic(dist, identity, m);

  std::vector<double> perm(n_permutations);
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < n_permutations; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32)};
    std::mt19937_64 rng(seq);
    order = identity;
    std::shuffle(order.begin(), order.end(), rng);
    perm[r] = split_statistic(dist, order, m);
  }

  // Ties with the observed value count against rejection; compare with a
  // relative tolerance so round-off in the re-summed splits does not matter.
  const double tol = 1e-12 * std::max(1.0, std::abs(result.statistic));
  const auto at_least = static_cast<std::size_t>(std::count_if(
      perm.begin(), perm.end(), [&](double v) { return v >= result.statistic - tol; }));
  result.p_value = static_cast<double>(1 + at_least) / static_cast<double>(n_permutations + 1);

  std::sort(perm.begin(), perm.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n_permutations) - 1e-9));
  result.critical_value = perm[std::clamp<std::size_t>(rank, 1, n_permutations) - 1];
  result.reject = result.statistic > result.critical_value;
  return result;
}

}  // namespace bandlime
