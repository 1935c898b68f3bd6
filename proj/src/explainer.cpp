#include "bandlime/explainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <string>
#include <thread>

#include "bandlime/error.hpp"
#include "bandlime/ridge.hpp"

namespace bandlime {

namespace {

// Re-raises a predictor failure with the index of the offending mask.
[[noreturn]] void rethrow_with_mask_index(std::exception_ptr failure, std::size_t chunk_start) {
  try {
    std::rethrow_exception(failure);
  } catch (const ProtocolError& e) {
    const std::size_t index = chunk_start + e.index().value_or(0);
    throw ProtocolError("mask " + std::to_string(index) + ": " + e.what(), e.request_id(), index);
  } catch (const PredictorTimeout& e) {
    const std::size_t index = chunk_start + e.index().value_or(0);
    throw PredictorTimeout("mask " + std::to_string(index) + ": " + e.what(), index);
  } catch (const PredictorError& e) {
    const std::size_t index = chunk_start + e.index().value_or(0);
    throw PredictorError("mask " + std::to_string(index) + ": " + e.what(), index);
  } catch (const NumericalError&) {
    throw;
  } catch (const std::exception& e) {
    throw PredictorError("mask " + std::to_string(chunk_start) + ": predictor failed: " + e.what(),
                         chunk_start);
  }
}

}  // namespace

void ExplainerConfig::validate() const {
  if (n_samples < 2) throw InvalidArgument("n_samples must be at least 2");
  if (n_components < 2) throw InvalidArgument("n_components must be at least 2");
  if (!(kernel_width > 0.0) || !std::isfinite(kernel_width)) {
    throw InvalidArgument("kernel width must be positive");
  }
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw InvalidArgument("ridge lambda must be non-negative");
  }
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  stft.validate();
  if (n_components > stft.n_bins()) {
    throw InvalidArgument("more components than STFT bins");
  }
}

std::vector<Mask> sample_masks(std::size_t n, std::size_t n_components, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("at least two perturbation samples are required");
  if (n_components == 0) throw InvalidArgument("masks need at least one component");
  std::vector<Mask> masks;
  masks.reserve(n);
  masks.push_back(Mask::all_ones(n_components));
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bits(n_components);
  for (std::size_t i = 1; i < n; ++i) {
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
    masks.emplace_back(bits);
  }
  return masks;
}

double cosine_distance(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw InvalidArgument("masks differ in length");
  std::size_t dot = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += (a[k] && b[k]) ? 1 : 0;
  const std::size_t na = a.count();
  const std::size_t nb = b.count();
  if (na == 0 || nb == 0) return 1.0;
  const double cos = static_cast<double>(dot) / std::sqrt(static_cast<double>(na * nb));
  return std::clamp(1.0 - cos, 0.0, 1.0);
}

double kernel_weight(double distance, double width) {
  if (!(distance >= 0.0)) throw InvalidArgument("distance must be non-negative");
  if (!(width > 0.0)) throw InvalidArgument("kernel width must be positive");
  return std::exp(-(distance * distance) / (width * width));
}

PerturbationSet perturb_and_predict(const AudioClip& clip, Predictor& predictor,
                                    std::size_t target_index, const ExplainerConfig& config) {
  config.validate();
  if (target_index >= predictor.n_classes()) throw InvalidArgument("target class out of range");

  const BandLayout layout(config.stft.n_bins(), config.n_components);
  const MaskedReconstructor reconstructor(clip, config.stft, layout);

  PerturbationSet set;
  set.masks = sample_masks(config.n_samples, config.n_components, config.seed);
  set.predictions.assign(config.n_samples, 0.0);

  const std::size_t n_chunks = (config.n_samples + config.batch_size - 1) / config.batch_size;
  std::vector<std::exception_ptr> failures(n_chunks);

  auto run_chunk = [&](std::size_t chunk) {
    const std::size_t start = chunk * config.batch_size;
    const std::size_t end = std::min(start + config.batch_size, config.n_samples);
    try {
      std::vector<AudioClip> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(reconstructor.reconstruct(set.masks[i]));
      }
      const Eigen::MatrixXd scores = predictor.predict(batch);
      if (scores.rows() != static_cast<Eigen::Index>(batch.size()) ||
          scores.cols() != static_cast<Eigen::Index>(predictor.n_classes())) {
        throw PredictorError("predictor returned a " + std::to_string(scores.rows()) + "x" +
                             std::to_string(scores.cols()) + " score matrix for " +
                             std::to_string(batch.size()) + " clips");
      }
      for (std::size_t i = start; i < end; ++i) {
        const double v = scores(static_cast<Eigen::Index>(i - start),
                                static_cast<Eigen::Index>(target_index));
        if (!std::isfinite(v)) {
          throw NumericalError("non-finite prediction for mask " + std::to_string(i) + " (" +
                               set.masks[i].to_string() + ")");
        }
        set.predictions[i] = v;
      }
    } catch (...) {
      failures[chunk] = std::current_exception();
    }
  };

  std::size_t threads = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  if (!predictor.concurrent_safe()) threads = 1;
  threads = std::clamp<std::size_t>(threads, 1, n_chunks);

  if (threads == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      run_chunk(c);
      if (failures[c]) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < n_chunks; c = next++) run_chunk(c);
      });
    }
  }
  for (std::size_t c = 0; c < n_chunks; ++c) {
    if (failures[c]) rethrow_with_mask_index(failures[c], c * config.batch_size);
  }

  const Mask original = Mask::all_ones(config.n_components);
  set.kernel_weights.reserve(config.n_samples);
  for (const Mask& m : set.masks) {
    set.kernel_weights.push_back(kernel_weight(cosine_distance(m, original), config.kernel_width));
  }
  return set;
}

Explanation explain(const AudioClip& clip, Predictor& predictor, const std::string& target_class,
                    const ExplainerConfig& config, const std::string& source_path) {
  const std::size_t target = predictor.class_index(target_class);
  const PerturbationSet set = perturb_and_predict(clip, predictor, target, config);
  const RidgeFit fit =
      fit_weighted_ridge(set.masks, set.predictions, set.kernel_weights, config.ridge_lambda);

  Explanation e;
  e.weights.assign(fit.weights.data(), fit.weights.data() + fit.weights.size());
  e.intercept = fit.intercept;
  e.score = fit.score;
  e.target_class = target_class;
  e.band_edges_hz = BandLayout(config.stft.n_bins(), config.n_components)
                        .band_edges_hz(clip.sample_rate_hz(), config.stft.window_len);
  e.sample_rate_hz = clip.sample_rate_hz();
  e.n_samples = config.n_samples;
  e.kernel_width = config.kernel_width;
  e.ridge_lambda = config.ridge_lambda;
  e.seed = config.seed;
  e.stft = config.stft;
  e.source_path = source_path;
  return e;
}

}  // namespace bandlime
