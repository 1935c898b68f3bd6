#pragma once

#include <span>

#include <Eigen/Dense>

#include "bandlime/mask.hpp"

namespace bandlime {

struct RidgeFit {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  /// Sample-weighted coefficient of determination.
  double score = 0.0;
};

/// Minimizes sum_i w_i (y_i - beta.x_i - b)^2 + lambda |beta|^2 with the
/// intercept b unpenalized. Centering by the weighted means removes b from the
/// system, leaving a d x d positive (semi)definite solve.
///
/// The score is 1 - SSE/SST with both sums sample-weighted; when the targets
/// are constant, it is 1 for an exact fit and 0 otherwise.
///
/// Throws InvalidArgument on shape mismatch, non-finite input, n < 2 or a
/// non-positive sample weight, and SingularSystem when lambda == 0 and the
/// weighted design is rank deficient.
RidgeFit fit_weighted_ridge(const Eigen::Ref<const Eigen::MatrixXd>& design,
                            const Eigen::Ref<const Eigen::VectorXd>& targets,
                            const Eigen::Ref<const Eigen::VectorXd>& sample_weights,
                            double lambda);

RidgeFit fit_weighted_ridge(std::span<const Mask> masks, std::span<const double> targets,
                            std::span<const double> sample_weights, double lambda);

/// Masks as a dense 0/1 design matrix (rows are masks).
Eigen::MatrixXd mask_design(std::span<const Mask> masks);

}  // namespace bandlime
