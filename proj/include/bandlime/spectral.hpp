#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "bandlime/audio.hpp"

namespace bandlime {

class Mask;  // mask.hpp

enum class WindowKind { hann };

struct StftParams {
  std::size_t window_len = 1024;
  std::size_t hop_len = 256;
  WindowKind window = WindowKind::hann;

  std::size_t n_bins() const { return window_len / 2 + 1; }

  /// Power-of-two window, hop dividing the window with at least 2x overlap.
  void validate() const;

  friend bool operator==(const StftParams&, const StftParams&) = default;
};

/// Periodic window of length params.window_len.
std::vector<double> make_window(const StftParams& params);

/// One-sided STFT. Rows are frames, columns are bins.
class Spectrogram {
 public:
  Spectrogram(std::size_t n_frames, StftParams params, int sample_rate_hz,
              std::size_t original_len);

  std::size_t n_frames() const { return n_frames_; }
  std::size_t n_bins() const { return params_.n_bins(); }
  const StftParams& params() const { return params_; }
  int sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t original_len() const { return original_len_; }

  std::span<std::complex<double>> frame(std::size_t f) {
    return {data_.data() + f * n_bins(), n_bins()};
  }
  std::span<const std::complex<double>> frame(std::size_t f) const {
    return {data_.data() + f * n_bins(), n_bins()};
  }
  std::complex<double>& at(std::size_t f, std::size_t bin) {
    return data_[f * n_bins() + bin];
  }
  const std::complex<double>& at(std::size_t f, std::size_t bin) const {
    return data_[f * n_bins() + bin];
  }

  /// Sum of |X|^2 over all frames for bins [first, last).
  double energy(std::size_t first_bin, std::size_t last_bin) const;

  friend bool operator==(const Spectrogram&, const Spectrogram&) = default;

 private:
  std::size_t n_frames_;
  StftParams params_;
  int sample_rate_hz_;
  std::size_t original_len_;
  std::vector<std::complex<double>> data_;
};

/// Half-open bin-index interval.
struct BinRange {
  std::size_t first;
  std::size_t last;

  std::size_t size() const { return last - first; }
  friend bool operator==(const BinRange&, const BinRange&) = default;
};

/// Partition of [0, n_bins) into equally sized contiguous bands; band k covers
/// [floor(k*n_bins/d), floor((k+1)*n_bins/d)).
class BandLayout {
 public:
  BandLayout(std::size_t n_bins, std::size_t n_components);

  std::size_t n_components() const { return ranges_.size(); }
  std::size_t n_bins() const { return n_bins_; }
  const std::vector<BinRange>& bin_ranges() const { return ranges_; }
  const BinRange& band(std::size_t k) const { return ranges_.at(k); }

  /// d+1 edges: band k starts at its first bin's centre frequency, the last
  /// edge is Nyquist.
  std::vector<double> band_edges_hz(int sample_rate_hz, std::size_t window_len) const;

  friend bool operator==(const BandLayout&, const BandLayout&) = default;

 private:
  std::size_t n_bins_;
  std::vector<BinRange> ranges_;
};

/// Frames start window_len - hop_len samples before the clip and run past its
/// end, so every input sample is covered by the full set of overlapping
/// windows. Padding is zeros at both ends. Short clips work the same way.
Spectrogram stft(const AudioClip& clip, const StftParams& params);

/// Weighted overlap-add with window-square normalization, truncated to the
/// original length. Throws NumericalError on a degenerate normalization.
AudioClip istft(const Spectrogram& spec);

/// Zeroes every coefficient of bands whose mask bit is 0.
Spectrogram apply_mask(const Spectrogram& spec, const Mask& mask,
                       const BandLayout& layout);

AudioClip perturb_audio(const AudioClip& clip, const Mask& mask,
                        const StftParams& params, const BandLayout& layout);

/// Caches the analysis of one clip so many masks can be reconstructed cheaply.
class MaskedReconstructor {
 public:
  MaskedReconstructor(const AudioClip& clip, const StftParams& params,
                      const BandLayout& layout);

  AudioClip reconstruct(const Mask& mask) const;

  const Spectrogram& spectrogram() const { return spec_; }
  const BandLayout& layout() const { return layout_; }

 private:
  Spectrogram spec_;
  BandLayout layout_;
};

/// Per-band energy of a spectrogram under a layout.
std::vector<double> band_energies(const Spectrogram& spec, const BandLayout& layout);

/// 10*log10(signal energy / error energy); +inf when the error is zero.
double snr_db(std::span<const float> reference, std::span<const float> estimate);

}  // namespace bandlime
