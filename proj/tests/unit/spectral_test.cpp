#include "bandlime/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bandlime/error.hpp"
#include "bandlime/mask.hpp"
#include "oracles.hpp"

namespace bandlime {
namespace {

AudioClip noise_clip(std::size_t n, std::uint64_t seed, float scale = 0.5f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-scale, scale);
  std::vector<float> s(n);
  for (float& v : s) v = u(rng);
  return AudioClip(std::move(s), 16000);
}

AudioClip sum(const AudioClip& a, const AudioClip& b) {
  std::vector<float> s(a.samples().begin(), a.samples().end());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += b.samples()[i];
  return AudioClip(std::move(s), a.sample_rate_hz());
}

double energy(std::span<const float> x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

const StftParams kDefault{};
const BandLayout kEight(kDefault.n_bins(), 8);

TEST(StftParams, Validation) {
  EXPECT_NO_THROW(kDefault.validate());
  EXPECT_THROW((StftParams{1000, 250}.validate()), InvalidArgument);
  EXPECT_THROW((StftParams{1024, 300}.validate()), InvalidArgument);
  EXPECT_THROW((StftParams{1024, 1024}.validate()), InvalidArgument);
  EXPECT_THROW((StftParams{1024, 0}.validate()), InvalidArgument);
  EXPECT_NO_THROW((StftParams{512, 256}.validate()));
}

TEST(BandLayout, DefaultEightBands) {
  EXPECT_EQ(kEight.n_bins(), 513u);
  const std::vector<std::size_t> starts{0, 64, 128, 192, 256, 320, 384, 448};
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(kEight.band(k).first, starts[k]);
  EXPECT_EQ(kEight.band(7).last, 513u);
  const auto edges = kEight.band_edges_hz(16000, 1024);
  ASSERT_EQ(edges.size(), 9u);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_DOUBLE_EQ(edges[k], 1000.0 * k);
}

TEST(BandLayout, PartitionProperty) {
  for (std::size_t n_bins = 1; n_bins <= 600; n_bins += 7) {
    for (std::size_t d = 1; d <= std::min<std::size_t>(n_bins, 40); ++d) {
      const BandLayout layout(n_bins, d);
      std::size_t expected_first = 0;
      std::size_t smallest = n_bins, largest = 0;
      for (const BinRange& r : layout.bin_ranges()) {
        ASSERT_EQ(r.first, expected_first);
        ASSERT_GT(r.last, r.first);
        smallest = std::min(smallest, r.size());
        largest = std::max(largest, r.size());
        expected_first = r.last;
      }
      ASSERT_EQ(expected_first, n_bins);
      ASSERT_LE(largest - smallest, 1u);
    }
  }
  EXPECT_THROW(BandLayout(10, 11), InvalidArgument);
  EXPECT_THROW(BandLayout(10, 0), InvalidArgument);
}

TEST(Stft, ZeroClipGivesZeroFrames) {
  const Spectrogram s = stft(AudioClip(std::vector<float>(4000, 0.0f), 16000), kDefault);
  for (std::size_t f = 0; f < s.n_frames(); ++f) {
    for (const auto& c : s.frame(f)) ASSERT_EQ(c, std::complex<double>{});
  }
}

TEST(Stft, BinCentredToneLandsOnItsBin) {
  constexpr std::size_t k = 100;
  const double freq = k * 16000.0 / 1024.0;
  const AudioClip tone = synth_tone(freq, 0.5, 16000, 0.8);
  const Spectrogram s = stft(tone, kDefault);

  std::vector<double> mean_mag(s.n_bins(), 0.0);
  for (std::size_t f = 0; f < s.n_frames(); ++f) {
    for (std::size_t b = 0; b < s.n_bins(); ++b) mean_mag[b] += std::abs(s.at(f, b));
  }
  EXPECT_EQ(std::max_element(mean_mag.begin(), mean_mag.end()) - mean_mag.begin(), k);

  // Interior frame against a direct DFT of the same windowed segment. Frame 5
  // starts at padded sample 5 * 256, i.e. clip sample 5 * 256 - 768.
  const std::size_t start = 5 * 256 - 768;
  const auto oracle = testing::windowed_frame_magnitudes(tone.samples().subspan(start, 1024));
  EXPECT_EQ(std::max_element(oracle.begin(), oracle.end()) - oracle.begin(), k);
  for (std::size_t b = 0; b < s.n_bins(); ++b) {
    ASSERT_NEAR(std::abs(s.at(5, b)), oracle[b], 1e-6 * (1.0 + oracle[k]));
  }
}

TEST(Stft, ShortAndMinimalClips) {
  EXPECT_GE(stft(noise_clip(1024, 1), kDefault).n_frames(), 1u);
  const AudioClip tiny = noise_clip(37, 2);
  const Spectrogram s = stft(tiny, kDefault);
  EXPECT_GE(s.n_frames(), 1u);
  EXPECT_EQ(s.original_len(), 37u);
  const AudioClip back = istft(s);
  ASSERT_EQ(back.size(), 37u);
  for (std::size_t i = 0; i < 37; ++i) EXPECT_NEAR(back.samples()[i], tiny.samples()[i], 1e-6);
}

TEST(Istft, RoundTripIsIdentity) {
  const AudioClip clip = noise_clip(12345, 3);
  const AudioClip back = istft(stft(clip, kDefault));
  ASSERT_EQ(back.size(), clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    ASSERT_NEAR(back.samples()[i], clip.samples()[i], 1e-6);
  }
  EXPECT_GE(snr_db(clip.samples(), back.samples()), 60.0);
}

TEST(Istft, ZeroSpectrogramGivesSilence) {
  const Spectrogram s(10, kDefault, 16000, 2000);
  const AudioClip out = istft(s);
  EXPECT_EQ(out.size(), 2000u);
  for (float v : out.samples()) ASSERT_EQ(v, 0.0f);
}

TEST(Istft, RoundTripSnrProperty) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(1024, 20000);
  for (int trial = 0; trial < 20; ++trial) {
    const StftParams p = trial % 2 ? StftParams{512, 128} : kDefault;
    const AudioClip clip = noise_clip(len(rng), 100 + trial);
    ASSERT_GE(snr_db(clip.samples(), istft(stft(clip, p)).samples()), 60.0);
  }
}

TEST(ApplyMask, IdentityAndZero) {
  const Spectrogram s = stft(noise_clip(5000, 4), kDefault);
  EXPECT_EQ(apply_mask(s, Mask::all_ones(8), kEight), s);
  const Spectrogram z = apply_mask(s, Mask::all_zeros(8), kEight);
  for (std::size_t f = 0; f < z.n_frames(); ++f) {
    for (const auto& c : z.frame(f)) ASSERT_EQ(c, std::complex<double>{});
  }
}

TEST(ApplyMask, ZeroesExactlyTheMaskedBands) {
  const Spectrogram s = stft(noise_clip(5000, 5), kDefault);
  const Mask m({1, 0, 1, 1, 0, 1, 1, 1});
  const Spectrogram out = apply_mask(s, m, kEight);
  for (std::size_t f = 0; f < s.n_frames(); ++f) {
    for (std::size_t b = 0; b < s.n_bins(); ++b) {
      const bool masked = (b >= 64 && b < 128) || (b >= 256 && b < 320);
      ASSERT_EQ(out.at(f, b), masked ? std::complex<double>{} : s.at(f, b));
    }
  }
}

TEST(ApplyMask, DimensionMismatch) {
  const Spectrogram s = stft(noise_clip(2000, 6), kDefault);
  EXPECT_THROW(apply_mask(s, Mask::all_ones(7), kEight), InvalidArgument);
  EXPECT_THROW(apply_mask(s, Mask::all_ones(8), BandLayout(257, 8)), InvalidArgument);
}

TEST(ApplyMask, Idempotent) {
  const Spectrogram s = stft(noise_clip(3000, 7), kDefault);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> bits(8);
    for (auto& b : bits) b = rng() & 1;
    const Mask m(bits);
    const Spectrogram once = apply_mask(s, m, kEight);
    ASSERT_EQ(apply_mask(once, m, kEight), once);
  }
}

TEST(ApplyMask, ToneBandMaskAttenuatesByFortyDb) {
  const AudioClip tone = synth_tone(2500.0, 2.0, 16000, 1.0);
  const AudioClip masked = istft(apply_mask(stft(tone, kDefault), Mask::all_ones(8).with(2, false), kEight));
  const double before = testing::band_energy(tone.samples(), 16000, 0.0, 8001.0);
  const double after = testing::band_energy(masked.samples(), 16000, 0.0, 8001.0);
  EXPECT_GE(10.0 * std::log10(before / after), 40.0);
}

TEST(PerturbAudio, AllOnesIsIdentity) {
  const AudioClip clip = noise_clip(9000, 9);
  const AudioClip out = perturb_audio(clip, Mask::all_ones(8), kDefault, kEight);
  ASSERT_EQ(out.size(), clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    ASSERT_NEAR(out.samples()[i], clip.samples()[i], 1e-6);
  }
}

TEST(PerturbAudio, AllZerosIsNearSilence) {
  const AudioClip clip = noise_clip(9000, 10);
  const AudioClip out = perturb_audio(clip, Mask::all_zeros(8), kDefault, kEight);
  EXPECT_LE(energy(out.samples()), 1e-10 * energy(clip.samples()));
}

TEST(PerturbAudio, MaskingToneBandLeavesOtherBandsAlone) {
  // A gated tone shorter than ~1 s carries more than -40 dB of onset energy
  // outside its band, so no band mask can reach 40 dB on it.
  const AudioClip tone = synth_tone(2500.0, 2.0, 16000, 0.5);
  const AudioClip noise = synth_band_noise(4000.0, 8000.0, 2.0, 16000, 11);
  const AudioClip clip = sum(tone, noise);
  const AudioClip out = perturb_audio(clip, Mask::all_ones(8).with(2, false), kDefault, kEight);

  const double tone_before = testing::band_energy(clip.samples(), 16000, 2000.0, 3000.0);
  const double tone_after = testing::band_energy(out.samples(), 16000, 2000.0, 3000.0);
  const double noise_before = testing::band_energy(clip.samples(), 16000, 4000.0, 8001.0);
  const double noise_after = testing::band_energy(out.samples(), 16000, 4000.0, 8001.0);
  EXPECT_GE(10.0 * std::log10(tone_before / tone_after), 40.0);
  EXPECT_LT(std::abs(10.0 * std::log10(noise_before / noise_after)), 1.0);
}

TEST(PerturbAudio, ReconstructorMatchesDirectPath) {
  const AudioClip clip = noise_clip(6000, 12);
  const MaskedReconstructor r(clip, kDefault, kEight);
  const Mask m({0, 1, 1, 0, 1, 0, 1, 1});
  EXPECT_EQ(r.reconstruct(m), perturb_audio(clip, m, kDefault, kEight));
}

// Band energies are measured by re-analysing the reconstruction. Hard band
// cuts leak a little energy into other bands on re-analysis, so dropping band
// k may move band j by at most the energy k alone leaks into j:
// sqrt(after_j) <= sqrt(before_j) + sqrt(leak_kj).
TEST(PerturbAudio, BandEnergyIsMonotoneUnderMasking) {
  const AudioClip clip = noise_clip(8000, 13);
  const MaskedReconstructor r(clip, kDefault, kEight);

  std::vector<std::vector<double>> leak;
  for (std::size_t k = 0; k < 8; ++k) {
    leak.push_back(band_energies(stft(r.reconstruct(Mask::all_zeros(8).with(k, true)), kDefault), kEight));
    for (std::size_t j = 0; j < 8; ++j) {
      if (j == k) continue;
      const double limit = (j + 1 == k || k + 1 == j) ? 1e-2 : 1e-4;
      EXPECT_LE(leak[k][j], limit * leak[k][k]) << "leak " << k << " -> " << j;
    }
  }

  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> bits(8);
    for (auto& b : bits) b = rng() & 1;
    const Mask m(bits);
    const auto before = band_energies(stft(r.reconstruct(m), kDefault), kEight);
    for (std::size_t k = 0; k < 8; ++k) {
      if (!m[k]) continue;
      const Mask fewer = m.with(k, false);
      const auto after = band_energies(stft(r.reconstruct(fewer), kDefault), kEight);
      for (std::size_t j = 0; j < 8; ++j) {
        if (!fewer[j]) continue;
        ASSERT_LE(std::sqrt(after[j]), std::sqrt(before[j]) + std::sqrt(leak[k][j]) + 1e-9)
            << "band " << j << " after dropping " << k;
      }
    }
  }
}

}  // namespace
}  // namespace bandlime
