#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bandlime {

/// Presence (1) or absence (0) of each spectral component.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::vector<std::uint8_t> bits);

  static Mask all_ones(std::size_t n_components);
  static Mask all_zeros(std::size_t n_components);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;

  Mask with(std::size_t k, bool value) const;
  std::string to_string() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

}  // namespace bandlime
