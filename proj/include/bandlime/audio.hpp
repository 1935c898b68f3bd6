#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bandlime {

/// Immutable mono waveform. Samples are nominally in [-1, 1]; masked
/// reconstructions may overshoot slightly, so only finiteness is enforced.
class AudioClip {
 public:
  static constexpr int kMinSampleRate = 8000;

  AudioClip(std::vector<float> samples, int sample_rate_hz);

  std::span<const float> samples() const { return samples_; }
  int sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const {
    return static_cast<double>(samples_.size()) / sample_rate_hz_;
  }
  double nyquist_hz() const { return sample_rate_hz_ / 2.0; }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

 private:
  std::vector<float> samples_;
  int sample_rate_hz_;
};

enum class WavEncoding { pcm16, float32 };

/// Reads RIFF/WAVE PCM16 or IEEE float32. Multi-channel input is mean-downmixed.
/// Throws FileNotFound, UnsupportedFormat, EmptyAudio or IoError.
AudioClip read_wav(const std::filesystem::path& path);

/// PCM16 output clamps to the representable range.
void write_wav(const AudioClip& clip, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::float32);

/// Serialized WAV bytes, as written by write_wav.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

AudioClip synth_tone(double freq_hz, double duration_s, int sample_rate_hz,
                     double amplitude = 1.0);

/// Spectral gain for the closed frequency interval [lo_hz, hi_hz].
struct BandGain {
  double lo_hz;
  double hi_hz;
  double gain;
};

/// Seeded white Gaussian noise shaped in the frequency domain: every DFT bin
/// is scaled by the gain of the first interval containing it (0 if none).
/// The result is peak-normalized to 0.9.
AudioClip synth_shaped_noise(std::span<const BandGain> bands, double duration_s,
                             int sample_rate_hz, std::uint64_t seed);

/// White noise restricted to [lo_hz, hi_hz], peak-normalized to 0.9.
AudioClip synth_band_noise(double lo_hz, double hi_hz, double duration_s,
                           int sample_rate_hz, std::uint64_t seed);

}  // namespace bandlime
