#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bandlime/audio.hpp"
#include "bandlime/mask.hpp"
#include "bandlime/predictor.hpp"
#include "bandlime/spectral.hpp"

namespace bandlime {

struct ExplainerConfig {
  std::size_t n_components = 8;
  std::size_t n_samples = 1000;
  double kernel_width = 0.25;
  double ridge_lambda = 1.0;
  std::uint64_t seed = 0;
  StftParams stft{};
  /// Perturbed clips handed to the predictor per call.
  std::size_t batch_size = 50;
  /// Worker threads for concurrent-safe predictors; 0 picks hardware concurrency.
  std::size_t threads = 1;

  void validate() const;
};

/// The n perturbations behind one explanation, in mask order.
struct PerturbationSet {
  std::vector<Mask> masks;
  std::vector<double> predictions;
  std::vector<double> kernel_weights;
};

struct Explanation {
  std::vector<double> weights;
  double intercept = 0.0;
  double score = 0.0;
  std::string target_class;
  std::vector<double> band_edges_hz;
  int sample_rate_hz = 0;
  // Configuration echo.
  std::size_t n_samples = 0;
  double kernel_width = 0.0;
  double ridge_lambda = 0.0;
  std::uint64_t seed = 0;
  StftParams stft{};
  std::string source_path;

  std::size_t n_components() const { return weights.size(); }

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

/// Element 0 is all ones; every bit of the rest is an independent fair coin
/// from a mt19937_64 seeded with `seed`. All-zero draws are kept.
std::vector<Mask> sample_masks(std::size_t n, std::size_t n_components, std::uint64_t seed);

/// 1 - a.b / (|a| |b|), with distance 1 when either mask is all zeros.
double cosine_distance(const Mask& a, const Mask& b);

/// exp(-distance^2 / width^2).
double kernel_weight(double distance, double width);

/// Masks, black-box scores for `target_class` and kernel weights, without the
/// surrogate fit.
PerturbationSet perturb_and_predict(const AudioClip& clip, Predictor& predictor,
                                    std::size_t target_index, const ExplainerConfig& config);

/// Explains predictor's score for `target_class` on `clip` with a kernel-weighted
/// ridge surrogate over band-presence masks.
Explanation explain(const AudioClip& clip, Predictor& predictor,
                    const std::string& target_class, const ExplainerConfig& config,
                    const std::string& source_path = {});

}  // namespace bandlime
