#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace bandlime {

/// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public IoError {
 public:
  using IoError::IoError;
};

/// The container parsed but the codec/layout is not one we read.
class UnsupportedFormat : public IoError {
 public:
  using IoError::IoError;
};

class EmptyAudio : public IoError {
 public:
  using IoError::IoError;
};

/// Weighted least squares without regularization on a rank-deficient design.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a degenerate normalization inside a numeric kernel.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The black-box predictor failed. `index` is the offending item when known.
class PredictorError : public Error {
 public:
  explicit PredictorError(const std::string& what,
                          std::optional<std::size_t> index = std::nullopt)
      : Error(what), index_(index) {}

  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class SpawnError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

/// The external process broke the line protocol.
class ProtocolError : public PredictorError {
 public:
  ProtocolError(const std::string& what,
                std::optional<std::uint64_t> request_id = std::nullopt,
                std::optional<std::size_t> index = std::nullopt)
      : PredictorError(what, index), request_id_(request_id) {}

  std::optional<std::uint64_t> request_id() const { return request_id_; }

 private:
  std::optional<std::uint64_t> request_id_;
};

class PredictorTimeout : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

}  // namespace bandlime
