#include "bandlime/ridge.hpp"

#include <cmath>
#include <string>

#include "bandlime/error.hpp"

namespace bandlime {

Eigen::MatrixXd mask_design(std::span<const Mask> masks) {
  if (masks.empty()) return {};
  const std::size_t d = masks.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(masks.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].size() != d) throw InvalidArgument("masks differ in length");
    for (std::size_t k = 0; k < d; ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = masks[i][k] ? 1.0 : 0.0;
    }
  }
  return x;
}

RidgeFit fit_weighted_ridge(const Eigen::Ref<const Eigen::MatrixXd>& design,
                            const Eigen::Ref<const Eigen::VectorXd>& targets,
                            const Eigen::Ref<const Eigen::VectorXd>& sample_weights,
                            double lambda) {
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  if (targets.size() != n || sample_weights.size() != n) {
    throw InvalidArgument("design, targets and weights must have the same number of rows");
  }
  if (n < 2) throw InvalidArgument("ridge fit needs at least two samples");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("ridge lambda must be finite and non-negative");
  }
  if (!design.allFinite() || !targets.allFinite() || !sample_weights.allFinite()) {
    throw InvalidArgument("ridge inputs must be finite");
  }
  if ((sample_weights.array() <= 0.0).any()) {
    throw InvalidArgument("sample weights must be positive");
  }

  // Constant targets: the exact minimizer is beta = 0, b = c for every lambda.
  if ((targets.array() == targets(0)).all()) {
    return RidgeFit{Eigen::VectorXd::Zero(d), targets(0), 1.0};
  }

  const double total_weight = sample_weights.sum();
  const Eigen::RowVectorXd x_mean =
      (sample_weights.transpose() * design) / total_weight;
  const double y_mean = sample_weights.dot(targets) / total_weight;

  const Eigen::MatrixXd xc = design.rowwise() - x_mean;
  const Eigen::VectorXd yc = targets.array() - y_mean;
  const Eigen::MatrixXd wxc = sample_weights.asDiagonal() * xc;

  Eigen::MatrixXd gram = xc.transpose() * wxc;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = wxc.transpose() * yc;

  RidgeFit fit;
  if (d == 0) {
    fit.weights = Eigen::VectorXd();
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    // LDLT pivots on the diagonal, so vectorD carries the eigen-scale of the
    // system; a vanishing pivot means a rank-deficient weighted design.
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double scale = pivots.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || scale == 0.0 ||
        (pivots.array() <= 1e-12 * scale).any()) {
      throw SingularSystem("weighted design is rank deficient; use a positive ridge lambda");
    }
    fit.weights = ldlt.solve(rhs);
  }
  fit.intercept = y_mean - x_mean.dot(fit.weights);

  const Eigen::VectorXd residual = yc - xc * fit.weights;
  const double sse = sample_weights.dot(residual.cwiseProduct(residual));
  const double sst = sample_weights.dot(yc.cwiseProduct(yc));
  if (sst > 0.0) {
    fit.score = 1.0 - sse / sst;
  } else {
    fit.score = sse == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

RidgeFit fit_weighted_ridge(std::span<const Mask> masks, std::span<const double> targets,
                            std::span<const double> sample_weights, double lambda) {
  const Eigen::MatrixXd x = mask_design(masks);
  const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const Eigen::Map<const Eigen::VectorXd> w(sample_weights.data(),
                                            static_cast<Eigen::Index>(sample_weights.size()));
  return fit_weighted_ridge(x, y, w, lambda);
}

}  // namespace bandlime
