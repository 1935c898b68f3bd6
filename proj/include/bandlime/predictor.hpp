#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandlime/audio.hpp"

namespace bandlime {

/// Black-box scorer: one row of per-class scores per input clip. Scores are
/// finite reals (probabilities or logits) comparable across calls.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual Eigen::MatrixXd predict(std::span<const AudioClip> clips) = 0;
  virtual const std::vector<std::string>& class_labels() const = 0;

  /// True when predict may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }

  std::size_t n_classes() const { return class_labels().size(); }
  /// Throws InvalidArgument for an unknown label.
  std::size_t class_index(const std::string& label) const;
};

/// Returns the same score for every class and every clip.
class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(std::vector<std::string> labels, double value);

  Eigen::MatrixXd predict(std::span<const AudioClip> clips) override;
  const std::vector<std::string>& class_labels() const override { return labels_; }
  bool concurrent_safe() const override { return true; }

 private:
  std::vector<std::string> labels_;
  double value_;
};

/// Adapts a per-clip scoring function.
class FunctionPredictor final : public Predictor {
 public:
  using Fn = std::function<std::vector<double>(const AudioClip&)>;

  FunctionPredictor(std::vector<std::string> labels, Fn fn, bool concurrent_safe = true);

  Eigen::MatrixXd predict(std::span<const AudioClip> clips) override;
  const std::vector<std::string>& class_labels() const override { return labels_; }
  bool concurrent_safe() const override { return concurrent_safe_; }

 private:
  std::vector<std::string> labels_;
  Fn fn_;
  bool concurrent_safe_;
};

}  // namespace bandlime
