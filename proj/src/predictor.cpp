#include "bandlime/predictor.hpp"

#include <algorithm>

#include "bandlime/error.hpp"

namespace bandlime {

std::size_t Predictor::class_index(const std::string& label) const {
  const auto& labels = class_labels();
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    std::string known;
    for (const auto& l : labels) known += (known.empty() ? "" : ", ") + l;
    throw InvalidArgument("unknown class '" + label + "' (known: " + known + ")");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

ConstantPredictor::ConstantPredictor(std::vector<std::string> labels, double value)
    : labels_(std::move(labels)), value_(value) {
  if (labels_.empty()) throw InvalidArgument("predictor needs at least one class");
}

Eigen::MatrixXd ConstantPredictor::predict(std::span<const AudioClip> clips) {
  return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(clips.size()),
                                   static_cast<Eigen::Index>(labels_.size()), value_);
}

FunctionPredictor::FunctionPredictor(std::vector<std::string> labels, Fn fn, bool concurrent_safe)
    : labels_(std::move(labels)), fn_(std::move(fn)), concurrent_safe_(concurrent_safe) {
  if (labels_.empty()) throw InvalidArgument("predictor needs at least one class");
}

Eigen::MatrixXd FunctionPredictor::predict(std::span<const AudioClip> clips) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(clips.size()),
                      static_cast<Eigen::Index>(labels_.size()));
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::vector<double> row;
    try {
      row = fn_(clips[i]);
    } catch (const PredictorError&) {
      throw;
    } catch (const std::exception& e) {
      throw PredictorError(std::string("scoring function failed: ") + e.what(), i);
    }
    if (row.size() != labels_.size()) {
      throw PredictorError("scoring function returned " + std::to_string(row.size()) +
                               " values for " + std::to_string(labels_.size()) + " classes",
                           i);
    }
    for (std::size_t k = 0; k < row.size(); ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
  }
  return out;
}

}  // namespace bandlime
