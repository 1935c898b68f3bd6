#include "bandlime/band_energy_model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "bandlime/error.hpp"

namespace bandlime {

namespace {

constexpr double kEnergyFloor = 1e-10;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

}  // namespace

std::vector<double> log_band_energies(const AudioClip& clip, std::size_t n_components,
                                      const StftParams& params) {
  const Spectrogram spec = stft(clip, params);
  const BandLayout layout(spec.n_bins(), n_components);
  std::vector<double> out = band_energies(spec, layout);
  for (double& e : out) e = std::log(kEnergyFloor + e);
  return out;
}

std::vector<double> band_energy_features(const AudioClip& clip, std::size_t n_components,
                                         const StftParams& params) {
  std::vector<double> f = log_band_energies(clip, n_components, params);
  const double n = static_cast<double>(f.size());
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / n;
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : f) v = sd > 1e-12 ? (v - mean) / sd : 0.0;
  return f;
}

BandEnergyModel::BandEnergyModel(std::vector<std::string> labels, Eigen::MatrixXd coefficients,
                                 Eigen::VectorXd bias, StftParams stft)
    : labels_(std::move(labels)),
      coefficients_(std::move(coefficients)),
      bias_(std::move(bias)),
      stft_(stft) {
  stft_.validate();
  const auto k = static_cast<Eigen::Index>(labels_.size());
  if (k < 2) throw InvalidArgument("band-energy model needs at least two classes");
  if (coefficients_.rows() != k || bias_.size() != k) {
    throw InvalidArgument("coefficient matrix must have one row per class");
  }
  if (coefficients_.cols() < 1 ||
      static_cast<std::size_t>(coefficients_.cols()) > stft_.n_bins()) {
    throw InvalidArgument("invalid component count for the band-energy model");
  }
  if (!coefficients_.allFinite() || !bias_.allFinite()) {
    throw InvalidArgument("band-energy model parameters must be finite");
  }
}

Eigen::VectorXd BandEnergyModel::probabilities(std::span<const double> features) const {
  if (features.size() != n_components()) throw InvalidArgument("feature length mismatch");
  const Eigen::Map<const Eigen::VectorXd> f(features.data(),
                                            static_cast<Eigen::Index>(features.size()));
  return softmax(coefficients_ * f + bias_);
}

Eigen::MatrixXd BandEnergyModel::predict(std::span<const AudioClip> clips) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(clips.size()),
                      static_cast<Eigen::Index>(labels_.size()));
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto f = band_energy_features(clips[i], n_components(), stft_);
    out.row(static_cast<Eigen::Index>(i)) = probabilities(f).transpose();
  }
  return out;
}

TrainedModel train_band_energy_model(std::span<const LabeledClip> dataset,
                                     std::vector<std::string> labels,
                                     const TrainingParams& params) {
  const std::size_t k = labels.size();
  if (k < 2) throw InvalidArgument("training needs at least two classes");
  if (!(params.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  params.stft.validate();

  std::vector<std::size_t> per_class(k, 0);
  for (const auto& item : dataset) {
    if (item.label >= k) throw InvalidArgument("label index out of range");
    ++per_class[item.label];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (per_class[c] < 2) {
      throw InvalidArgument("class '" + labels[c] + "' has " + std::to_string(per_class[c]) +
                            " clips; at least two are required");
    }
  }

  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto d = static_cast<Eigen::Index>(params.n_components);
  Eigen::MatrixXd x(n, d);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& item = dataset[static_cast<std::size_t>(i)];
    const auto f = band_energy_features(item.clip, params.n_components, params.stft);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = f[static_cast<std::size_t>(j)];
    onehot(i, static_cast<Eigen::Index>(item.label)) = 1.0;
  }

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(k), d);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = init(rng);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));

  auto class_probs = [&](const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias) {
    Eigen::MatrixXd logits = (x * weights.transpose()).rowwise() + bias.transpose();
    for (Eigen::Index i = 0; i < n; ++i) logits.row(i) = softmax(logits.row(i).transpose());
    return logits;
  };

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    const Eigen::MatrixXd residual = class_probs(w, b) - onehot;  // dL/dlogits * n
    w -= params.learning_rate * (residual.transpose() * x) / static_cast<double>(n);
    b -= params.learning_rate * residual.colwise().sum().transpose() / static_cast<double>(n);
  }

  const Eigen::MatrixXd probs = class_probs(w, b);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    if (static_cast<std::size_t>(best) == dataset[static_cast<std::size_t>(i)].label) ++correct;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return TrainedModel{BandEnergyModel(std::move(labels), std::move(w), std::move(b), params.stft),
                      accuracy};
}

}  // namespace bandlime
