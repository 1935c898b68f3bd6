#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandlime/audio.hpp"
#include "bandlime/predictor.hpp"
#include "bandlime/spectral.hpp"

namespace bandlime {

/// log(1e-10 + E_k) for each band k over the whole clip.
std::vector<double> log_band_energies(const AudioClip& clip, std::size_t n_components,
                                      const StftParams& params);

/// log_band_energies standardized across the bands of the clip. A zero-variance
/// profile (e.g. silence) maps to all zeros.
std::vector<double> band_energy_features(const AudioClip& clip, std::size_t n_components,
                                         const StftParams& params);

/// Multinomial logistic regression over band-energy features.
class BandEnergyModel final : public Predictor {
 public:
  BandEnergyModel(std::vector<std::string> labels, Eigen::MatrixXd coefficients,
                  Eigen::VectorXd bias, StftParams stft);

  /// Softmax class probabilities.
  Eigen::MatrixXd predict(std::span<const AudioClip> clips) override;
  const std::vector<std::string>& class_labels() const override { return labels_; }
  bool concurrent_safe() const override { return true; }

  Eigen::VectorXd probabilities(std::span<const double> features) const;

  /// n_classes x n_components.
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  std::size_t n_components() const { return static_cast<std::size_t>(coefficients_.cols()); }
  const StftParams& stft() const { return stft_; }

 private:
  std::vector<std::string> labels_;
  Eigen::MatrixXd coefficients_;
  Eigen::VectorXd bias_;
  StftParams stft_;
};

struct LabeledClip {
  AudioClip clip;
  std::size_t label;
};

struct TrainingParams {
  double learning_rate = 0.5;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::size_t n_components = 8;
  StftParams stft{};
};

struct TrainedModel {
  BandEnergyModel model;
  double training_accuracy;
};

/// Full-batch gradient descent on the mean cross-entropy. Initial weights are
/// drawn from N(0, 0.01^2) using `seed`.
/// Throws InvalidArgument with fewer than two classes, a label out of range,
/// or a class with fewer than two clips.
TrainedModel train_band_energy_model(std::span<const LabeledClip> dataset,
                                     std::vector<std::string> labels,
                                     const TrainingParams& params);

}  // namespace bandlime
