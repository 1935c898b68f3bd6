#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bandlime/predictor.hpp"

namespace bandlime {

/// Runs `command` through /bin/sh and speaks the line-delimited JSON protocol
/// over its stdin/stdout:
///
///   child  -> {"type":"hello","n_classes":K,"labels":[...]}
///   parent -> {"type":"predict","id":N,"sample_rate":SR,"samples_b64":"..."}
///   child  -> {"type":"prediction","id":N,"probs":[K floats]}
///   parent -> {"type":"bye"}
///
/// samples_b64 is base64 of little-endian float32 samples. Responses may come
/// back in any order; unknown fields are ignored. A {"type":"error","id":N}
/// line fails request N.
///
/// Writes to one child are serialized, so the predictor is not concurrent safe.
class ExternalPredictor final : public Predictor {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    /// Requests written before waiting for a response.
    std::size_t max_in_flight = 8;
  };

  explicit ExternalPredictor(std::string command);
  ExternalPredictor(std::string command, Options options);
  ~ExternalPredictor() override;

  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  /// Throws ProtocolError (naming the request id), PredictorTimeout or
  /// PredictorError; the index of the failing clip is attached when known.
  Eigen::MatrixXd predict(std::span<const AudioClip> clips) override;
  const std::vector<std::string>& class_labels() const override { return labels_; }

 private:
  std::string read_line(std::chrono::steady_clock::time_point deadline);
  void shutdown();

  std::string command_;
  Options options_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;
  std::uint64_t next_id_ = 0;
  std::vector<std::string> labels_;
};

/// Wire encoding of samples: base64 of little-endian float32.
std::string encode_samples_b64(std::span<const float> samples);
/// Throws InvalidArgument on malformed base64 or a length not divisible by 4.
std::vector<float> decode_samples_b64(const std::string& text);

}  // namespace bandlime
