#include "bandlime/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <unsupported/Eigen/FFT>

#include "bandlime/error.hpp"

namespace bandlime {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

static_assert(std::endian::native == std::endian::little,
              "WAV encoding assumes a little-endian host");

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

AudioClip peak_normalized(std::vector<double> samples, int sample_rate_hz) {
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  std::vector<float> out(samples.size(), 0.0f);
  if (peak > 0.0) {
    const double scale = 0.9 / peak;
    std::transform(samples.begin(), samples.end(), out.begin(),
                   [scale](double s) { return static_cast<float>(s * scale); });
  }
  return AudioClip(std::move(out), sample_rate_hz);
}

std::size_t sample_count(double duration_s, int sample_rate_hz) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw InvalidArgument("duration must be positive, got " + std::to_string(duration_s));
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  if (n == 0) throw InvalidArgument("duration shorter than one sample");
  return n;
}

void check_rate(int sample_rate_hz) {
  if (sample_rate_hz < AudioClip::kMinSampleRate) {
    throw InvalidArgument("sample rate must be at least 8000 Hz, got " +
                          std::to_string(sample_rate_hz));
  }
}

}  // namespace

AudioClip::AudioClip(std::vector<float> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (samples_.empty()) throw InvalidArgument("audio clip must contain at least one sample");
  check_rate(sample_rate_hz_);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw InvalidArgument("non-finite sample at index " + std::to_string(i));
    }
  }
}

AudioClip decode_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
    throw UnsupportedFormat("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, b.size() - body);
    if (tag_is(b, pos, "fmt ")) {
      if (available < 16) throw UnsupportedFormat("truncated fmt chunk");
      format = read_u16(b, body);
      channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      bits = read_u16(b, body + 14);
      if (format == kFormatExtensible) {
        if (available < 26) throw UnsupportedFormat("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk");
        // First two bytes of the sub-format GUID carry the real format tag.
        format = read_u16(b, body + 24);
      }
      have_fmt = true;
    } else if (tag_is(b, pos, "data")) {
      // Some writers leave the data size at 0 or 0xFFFFFFFF when streaming.
      data = b.subspan(body, available);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw UnsupportedFormat("missing fmt chunk");
  if (!have_data) throw UnsupportedFormat("missing data chunk");
  if (channels == 0) throw UnsupportedFormat("zero channels");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedFormat("unsupported codec: format tag " + std::to_string(format) + " with " +
                            std::to_string(bits) + " bits per sample");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  const std::size_t n_frames = data.size() / frame_bytes;
  if (n_frames == 0) throw EmptyAudio("WAV file contains no audio frames");

  std::vector<float> samples(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = i * frame_bytes + c * (bits / 8);
      if (pcm16) {
        sum += static_cast<std::int16_t>(read_u16(data, at)) / 32768.0;
      } else {
        sum += std::bit_cast<float>(read_u32(data, at));
      }
    }
    samples[i] = channels == 1 ? static_cast<float>(sum) : static_cast<float>(sum / channels);
  }
  if (rate > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
    throw UnsupportedFormat("sample rate out of range");
  }
  try {
    return AudioClip(std::move(samples), static_cast<int>(rate));
  } catch (const InvalidArgument& e) {
    throw UnsupportedFormat(e.what());
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw FileNotFound("no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const IoError& e) {
    // Re-throw with the path, preserving the exception type.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const EmptyAudio*>(&e)) throw EmptyAudio(msg);
    if (dynamic_cast<const UnsupportedFormat*>(&e)) throw UnsupportedFormat(msg);
    throw IoError(msg);
  }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz()));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz()) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : clip.samples()) {
    if (pcm) {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(q));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

AudioClip synth_tone(double freq_hz, double duration_s, int sample_rate_hz, double amplitude) {
  check_rate(sample_rate_hz);
  if (!(freq_hz > 0.0) || freq_hz >= sample_rate_hz / 2.0) {
    throw InvalidArgument("tone frequency must lie in (0, Nyquist), got " + std::to_string(freq_hz));
  }
  if (!(amplitude > 0.0) || amplitude > 1.0) {
    throw InvalidArgument("amplitude must lie in (0, 1]");
  }
  const std::size_t n = sample_count(duration_s, sample_rate_hz);
  std::vector<float> samples(n);
  const double step = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  for (std::size_t t = 0; t < n; ++t) {
    samples[t] = static_cast<float>(amplitude * std::sin(step * static_cast<double>(t)));
  }
  return AudioClip(std::move(samples), sample_rate_hz);
}

AudioClip synth_shaped_noise(std::span<const BandGain> bands, double duration_s,
                             int sample_rate_hz, std::uint64_t seed) {
  check_rate(sample_rate_hz);
  const std::size_t n = sample_count(duration_s, sample_rate_hz);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(n);
  for (double& v : noise) v = gauss(rng);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, noise);  // full spectrum, length n

  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Bin i and its mirror n - i share the frequency min(i, n - i) * bin_hz.
    const double f = static_cast<double>(std::min(i, n - i)) * bin_hz;
    double gain = 0.0;
    for (const BandGain& band : bands) {
      if (f >= band.lo_hz && f <= band.hi_hz) {
        gain = band.gain;
        break;
      }
    }
    spectrum[i] *= gain;
  }
  std::vector<double> shaped;
  fft.inv(shaped, spectrum);
  return peak_normalized(std::move(shaped), sample_rate_hz);
}

AudioClip synth_band_noise(double lo_hz, double hi_hz, double duration_s, int sample_rate_hz,
                           std::uint64_t seed) {
  check_rate(sample_rate_hz);
  if (!(lo_hz >= 0.0) || !(hi_hz > lo_hz) || hi_hz > sample_rate_hz / 2.0) {
    throw InvalidArgument("band must satisfy 0 <= lo < hi <= Nyquist");
  }
  const BandGain band{lo_hz, hi_hz, 1.0};
  return synth_shaped_noise(std::span(&band, 1), duration_s, sample_rate_hz, seed);
}

}  // namespace bandlime
