#include "bandlime/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "bandlime/error.hpp"
#include "bandlime/mask.hpp"

namespace bandlime {

namespace {

Eigen::FFT<double>& half_spectrum_fft() {
  // Eigen::FFT caches twiddles per size and is not safe to share across threads.
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

// Leading zeros so the first sample sees every overlapping window.
std::size_t front_padding(const StftParams& p) { return p.window_len - p.hop_len; }

std::size_t frame_count(std::size_t len, const StftParams& p) {
  return (front_padding(p) + len - 1) / p.hop_len + 1;
}

}  // namespace

void StftParams::validate() const {
  if (window_len < 2 || !std::has_single_bit(window_len)) {
    throw InvalidArgument("window length must be a power of two >= 2, got " +
                          std::to_string(window_len));
  }
  if (hop_len == 0 || window_len % hop_len != 0 || window_len / hop_len < 2) {
    throw InvalidArgument("hop length must divide the window length with at least 50% overlap");
  }
}

std::vector<double> make_window(const StftParams& params) {
  std::vector<double> w(params.window_len);
  const double n = static_cast<double>(params.window_len);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  return w;
}

Spectrogram::Spectrogram(std::size_t n_frames, StftParams params, int sample_rate_hz,
                         std::size_t original_len)
    : n_frames_(n_frames),
      params_(params),
      sample_rate_hz_(sample_rate_hz),
      original_len_(original_len),
      data_(n_frames * params.n_bins()) {
  params_.validate();
}

double Spectrogram::energy(std::size_t first_bin, std::size_t last_bin) const {
  double total = 0.0;
  for (std::size_t f = 0; f < n_frames_; ++f) {
    const auto row = frame(f);
    for (std::size_t k = first_bin; k < last_bin; ++k) total += std::norm(row[k]);
  }
  return total;
}

BandLayout::BandLayout(std::size_t n_bins, std::size_t n_components) : n_bins_(n_bins) {
  if (n_components == 0 || n_components > n_bins) {
    throw InvalidArgument("component count must lie in [1, n_bins], got " +
                          std::to_string(n_components));
  }
  ranges_.reserve(n_components);
  for (std::size_t k = 0; k < n_components; ++k) {
    ranges_.push_back({k * n_bins / n_components, (k + 1) * n_bins / n_components});
  }
}

std::vector<double> BandLayout::band_edges_hz(int sample_rate_hz, std::size_t window_len) const {
  std::vector<double> edges;
  edges.reserve(ranges_.size() + 1);
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(window_len);
  for (const BinRange& r : ranges_) edges.push_back(static_cast<double>(r.first) * bin_hz);
  edges.push_back(sample_rate_hz / 2.0);
  return edges;
}

Spectrogram stft(const AudioClip& clip, const StftParams& params) {
  params.validate();
  const std::size_t len = clip.size();
  const std::size_t pad = front_padding(params);
  const std::size_t n_frames = frame_count(len, params);
  const auto window = make_window(params);
  const auto samples = clip.samples();

  Spectrogram spec(n_frames, params, clip.sample_rate_hz(), len);
  auto& fft = half_spectrum_fft();
  std::vector<double> segment(params.window_len);
  std::vector<std::complex<double>> bins;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * params.hop_len;  // in padded coordinates
    for (std::size_t i = 0; i < params.window_len; ++i) {
      const std::size_t p = start + i;
      const bool inside = p >= pad && p - pad < len;
      segment[i] = inside ? window[i] * static_cast<double>(samples[p - pad]) : 0.0;
    }
    fft.fwd(bins, segment);
    std::copy(bins.begin(), bins.end(), spec.frame(f).begin());
  }
  return spec;
}

AudioClip istft(const Spectrogram& spec) {
  const StftParams& params = spec.params();
  const std::size_t pad = front_padding(params);
  const std::size_t padded_len = (spec.n_frames() - 1) * params.hop_len + params.window_len;
  const auto window = make_window(params);

  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> norm(padded_len, 0.0);
  auto& fft = half_spectrum_fft();
  std::vector<std::complex<double>> bins(spec.n_bins());
  std::vector<double> segment;
  for (std::size_t f = 0; f < spec.n_frames(); ++f) {
    const auto row = spec.frame(f);
    std::copy(row.begin(), row.end(), bins.begin());
    fft.inv(segment, bins, static_cast<Eigen::Index>(params.window_len));
    const std::size_t start = f * params.hop_len;
    for (std::size_t i = 0; i < params.window_len; ++i) {
      acc[start + i] += window[i] * segment[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  std::vector<float> out(spec.original_len());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double w2 = norm[pad + t];
    if (w2 < 1e-12) {
      throw NumericalError("degenerate overlap-add normalization at sample " + std::to_string(t));
    }
    out[t] = static_cast<float>(acc[pad + t] / w2);
  }
  return AudioClip(std::move(out), spec.sample_rate_hz());
}

Spectrogram apply_mask(const Spectrogram& spec, const Mask& mask, const BandLayout& layout) {
  if (mask.size() != layout.n_components()) {
    throw InvalidArgument("mask has " + std::to_string(mask.size()) + " entries, layout has " +
                          std::to_string(layout.n_components()) + " components");
  }
  if (layout.n_bins() != spec.n_bins()) {
    throw InvalidArgument("band layout covers " + std::to_string(layout.n_bins()) +
                          " bins, spectrogram has " + std::to_string(spec.n_bins()));
  }
  Spectrogram out = spec;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k]) continue;
    const BinRange& r = layout.band(k);
    for (std::size_t f = 0; f < out.n_frames(); ++f) {
      auto row = out.frame(f);
      std::fill(row.begin() + static_cast<std::ptrdiff_t>(r.first),
                row.begin() + static_cast<std::ptrdiff_t>(r.last), std::complex<double>{});
    }
  }
  return out;
}

AudioClip perturb_audio(const AudioClip& clip, const Mask& mask, const StftParams& params,
                        const BandLayout& layout) {
  return istft(apply_mask(stft(clip, params), mask, layout));
}

MaskedReconstructor::MaskedReconstructor(const AudioClip& clip, const StftParams& params,
                                         const BandLayout& layout)
    : spec_(stft(clip, params)), layout_(layout) {
  if (layout_.n_bins() != spec_.n_bins()) {
    throw InvalidArgument("band layout does not match the STFT bin count");
  }
}

AudioClip MaskedReconstructor::reconstruct(const Mask& mask) const {
  return istft(apply_mask(spec_, mask, layout_));
}

std::vector<double> band_energies(const Spectrogram& spec, const BandLayout& layout) {
  std::vector<double> out;
  out.reserve(layout.n_components());
  for (const BinRange& r : layout.bin_ranges()) out.push_back(spec.energy(r.first, r.last));
  return out;
}

double snr_db(std::span<const float> reference, std::span<const float> estimate) {
  if (reference.size() != estimate.size()) throw InvalidArgument("SNR inputs differ in length");
  double signal = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double d = r - static_cast<double>(estimate[i]);
    signal += r * r;
    error += d * d;
  }
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

}  // namespace bandlime
