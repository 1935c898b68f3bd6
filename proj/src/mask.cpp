#include "bandlime/mask.hpp"

#include <algorithm>
#include <numeric>

#include "bandlime/error.hpp"

namespace bandlime {

Mask::Mask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::uint8_t b : bits_) {
    if (b > 1) throw InvalidArgument("mask entries must be 0 or 1");
  }
}

Mask Mask::all_ones(std::size_t n_components) {
  return Mask(std::vector<std::uint8_t>(n_components, 1));
}

Mask Mask::all_zeros(std::size_t n_components) {
  return Mask(std::vector<std::uint8_t>(n_components, 0));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::with(std::size_t k, bool value) const {
  if (k >= bits_.size()) throw InvalidArgument("mask index out of range");
  Mask copy = *this;
  copy.bits_[k] = value ? 1 : 0;
  return copy;
}

std::string Mask::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (std::uint8_t b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

}  // namespace bandlime
