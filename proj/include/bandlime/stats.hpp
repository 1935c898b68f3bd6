#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandlime/explainer.hpp"

namespace bandlime {

/// Explanation weights for one emotion across utterances.
struct EmotionAggregate {
  std::string emotion;
  std::vector<double> mean_weights;
  /// Sample standard deviation (n - 1), zero when there is one utterance.
  std::vector<double> std_weights;
  /// n_utterances x n_components.
  Eigen::MatrixXd weights;
  std::vector<std::string> sources;

  std::size_t n_utterances() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_components() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Throws InvalidArgument for an empty input, mixed component counts or a
/// target class other than `emotion`.
EmotionAggregate aggregate(std::span<const Explanation> explanations, const std::string& emotion);

/// Same, from a raw utterance x component matrix.
EmotionAggregate aggregate_matrix(const Eigen::MatrixXd& weights, const std::string& emotion,
                                  std::vector<std::string> sources = {});

struct CramerResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  std::size_t n_permutations = 0;
  bool reject = false;
};

/// Two-sample Cramer statistic with Euclidean distances:
///   mn/(m+n) * [ mean|X-Y| - mean|X-X'|/2 - mean|Y-Y'|/2 ]
/// Rows are observations. Throws InvalidArgument on empty samples or a
/// dimension mismatch.
double cramer_statistic(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Permutation test: the pooled rows are re-split into sizes (m, n)
/// uniformly at random. Replicate r draws from its own generator seeded with
/// (seed, r), so the result does not depend on evaluation order.
///
/// critical_value is the ceil((1 - alpha) * B)-th smallest permutation
/// statistic, p_value = (1 + #{perm >= observed}) / (B + 1), and the null is
/// rejected when statistic > critical_value.
///
/// Throws InvalidArgument when m or n < 2, n_permutations < 99, or alpha is
/// outside (0, 1).
CramerResult cramer_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double alpha,
                         std::size_t n_permutations, std::uint64_t seed);

}  // namespace bandlime
