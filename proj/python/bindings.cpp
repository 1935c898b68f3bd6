#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bandlime/audio.hpp"
#include "bandlime/band_energy_model.hpp"
#include "bandlime/error.hpp"
#include "bandlime/explainer.hpp"
#include "bandlime/ridge.hpp"
#include "bandlime/spectral.hpp"
#include "bandlime/stats.hpp"

namespace py = pybind11;
using namespace bandlime;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

AudioClip clip_from_array(const FloatArray& samples, int sample_rate_hz) {
  if (samples.ndim() != 1) throw InvalidArgument("samples must be one-dimensional");
  std::vector<float> v(samples.data(), samples.data() + samples.size());
  return AudioClip(std::move(v), sample_rate_hz);
}

FloatArray clip_to_array(const AudioClip& clip) {
  FloatArray out(static_cast<py::ssize_t>(clip.size()));
  std::copy(clip.samples().begin(), clip.samples().end(), out.mutable_data());
  return out;
}

Mask mask_from(const std::vector<int>& bits) {
  std::vector<std::uint8_t> b;
  b.reserve(bits.size());
  for (int v : bits) {
    if (v != 0 && v != 1) throw InvalidArgument("mask entries must be 0 or 1");
    b.push_back(static_cast<std::uint8_t>(v));
  }
  return Mask(std::move(b));
}

StftParams stft_params(std::size_t window, std::size_t hop) {
  StftParams p;
  p.window_len = window;
  p.hop_len = hop;
  p.validate();
  return p;
}

/// Forwards batches to a Python callable: fn(list[np.ndarray], sample_rate) -> (n, k) scores.
class PythonPredictor final : public Predictor {
 public:
  PythonPredictor(py::function fn, std::vector<std::string> labels)
      : fn_(std::move(fn)), labels_(std::move(labels)) {}

  Eigen::MatrixXd predict(std::span<const AudioClip> clips) override {
    py::gil_scoped_acquire gil;
    py::list batch;
    for (const auto& c : clips) batch.append(clip_to_array(c));
    const int rate = clips.empty() ? 0 : clips.front().sample_rate_hz();
    return fn_(batch, rate).cast<Eigen::MatrixXd>();
  }
  const std::vector<std::string>& class_labels() const override { return labels_; }

 private:
  py::function fn_;
  std::vector<std::string> labels_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Band-masking local surrogate explanations for audio classifiers";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<SingularSystem>(m, "SingularSystem", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<PredictorError>(m, "PredictorError", base.ptr());

  py::class_<AudioClip>(m, "AudioClip")
      .def(py::init(&clip_from_array), py::arg("samples"), py::arg("sample_rate_hz"))
      .def_property_readonly("samples", &clip_to_array)
      .def_property_readonly("sample_rate_hz", &AudioClip::sample_rate_hz)
      .def_property_readonly("duration_s", &AudioClip::duration_s)
      .def("__len__", &AudioClip::size);

  m.def("read_wav", &read_wav, py::arg("path"));
  m.def(
      "write_wav",
      [](const AudioClip& clip, const std::filesystem::path& path, const std::string& encoding) {
        if (encoding != "pcm16" && encoding != "float32") {
          throw InvalidArgument("encoding must be 'pcm16' or 'float32'");
        }
        write_wav(clip, path, encoding == "pcm16" ? WavEncoding::pcm16 : WavEncoding::float32);
      },
      py::arg("clip"), py::arg("path"), py::arg("encoding") = "float32");
  m.def("synth_tone", &synth_tone, py::arg("freq_hz"), py::arg("duration_s"),
        py::arg("sample_rate_hz") = 16000, py::arg("amplitude") = 1.0);
  m.def("synth_band_noise", &synth_band_noise, py::arg("lo_hz"), py::arg("hi_hz"),
        py::arg("duration_s"), py::arg("sample_rate_hz") = 16000, py::arg("seed") = 0);

  m.def(
      "band_ranges",
      [](std::size_t n_bins, std::size_t n_components) {
        const BandLayout layout(n_bins, n_components);
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& r : layout.bin_ranges()) out.emplace_back(r.first, r.last);
        return out;
      },
      py::arg("n_bins"), py::arg("n_components"));
  m.def(
      "stft",
      [](const AudioClip& clip, std::size_t window, std::size_t hop) {
        const Spectrogram s = stft(clip, stft_params(window, hop));
        py::array_t<std::complex<double>> out({s.n_frames(), s.n_bins()});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t f = 0; f < s.n_frames(); ++f) {
          for (std::size_t b = 0; b < s.n_bins(); ++b) {
            view(static_cast<py::ssize_t>(f), static_cast<py::ssize_t>(b)) = s.at(f, b);
          }
        }
        return out;
      },
      py::arg("clip"), py::arg("window") = 1024, py::arg("hop") = 256);
  m.def(
      "perturb_audio",
      [](const AudioClip& clip, const std::vector<int>& mask, std::size_t window, std::size_t hop) {
        const StftParams p = stft_params(window, hop);
        return perturb_audio(clip, mask_from(mask), p, BandLayout(p.n_bins(), mask.size()));
      },
      py::arg("clip"), py::arg("mask"), py::arg("window") = 1024, py::arg("hop") = 256);
  m.def(
      "band_energy_features",
      [](const AudioClip& clip, std::size_t n_components, std::size_t window, std::size_t hop) {
        return band_energy_features(clip, n_components, stft_params(window, hop));
      },
      py::arg("clip"), py::arg("n_components") = 8, py::arg("window") = 1024, py::arg("hop") = 256);

  m.def(
      "sample_masks",
      [](std::size_t n, std::size_t d, std::uint64_t seed) {
        const auto masks = sample_masks(n, d, seed);
        py::array_t<std::uint8_t> out({n, d});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < d; ++k) {
            view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = masks[i].bits()[k];
          }
        }
        return out;
      },
      py::arg("n"), py::arg("n_components"), py::arg("seed"));
  m.def(
      "cosine_distance",
      [](const std::vector<int>& a, const std::vector<int>& b) {
        return cosine_distance(mask_from(a), mask_from(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("kernel_weight", &kernel_weight, py::arg("distance"), py::arg("width"));

  py::class_<RidgeFit>(m, "RidgeFit")
      .def_readonly("weights", &RidgeFit::weights)
      .def_readonly("intercept", &RidgeFit::intercept)
      .def_readonly("score", &RidgeFit::score);
  m.def(
      "fit_weighted_ridge",
      [](const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
         const Eigen::VectorXd& weights, double lambda) {
        return fit_weighted_ridge(design, targets, weights, lambda);
      },
      py::arg("design"), py::arg("targets"), py::arg("sample_weights"), py::arg("ridge_lambda"));

  py::class_<Explanation>(m, "Explanation")
      .def_readonly("weights", &Explanation::weights)
      .def_readonly("intercept", &Explanation::intercept)
      .def_readonly("score", &Explanation::score)
      .def_readonly("target_class", &Explanation::target_class)
      .def_readonly("band_edges_hz", &Explanation::band_edges_hz)
      .def_readonly("seed", &Explanation::seed)
      .def_readonly("n_samples", &Explanation::n_samples);
  m.def(
      "explain",
      [](const AudioClip& clip, py::function predict, std::vector<std::string> labels,
         const std::string& target, std::size_t n_components, std::size_t n_samples,
         double kernel_width, double ridge_lambda, std::uint64_t seed, std::size_t window,
         std::size_t hop) {
        PythonPredictor predictor(std::move(predict), std::move(labels));
        ExplainerConfig config;
        config.n_components = n_components;
        config.n_samples = n_samples;
        config.kernel_width = kernel_width;
        config.ridge_lambda = ridge_lambda;
        config.seed = seed;
        config.stft = stft_params(window, hop);
        return explain(clip, predictor, target, config);
      },
      py::arg("clip"), py::arg("predict"), py::arg("labels"), py::arg("target"),
      py::arg("n_components") = 8, py::arg("n_samples") = 1000, py::arg("kernel_width") = 0.25,
      py::arg("ridge_lambda") = 1.0, py::arg("seed") = 0, py::arg("window") = 1024,
      py::arg("hop") = 256,
      "predict(clips: list[np.ndarray], sample_rate: int) must return an (n, n_classes) array.");

  py::class_<EmotionAggregate>(m, "EmotionAggregate")
      .def_readonly("emotion", &EmotionAggregate::emotion)
      .def_readonly("mean_weights", &EmotionAggregate::mean_weights)
      .def_readonly("std_weights", &EmotionAggregate::std_weights)
      .def_readonly("weights", &EmotionAggregate::weights);
  m.def(
      "aggregate",
      [](const Eigen::MatrixXd& weights, const std::string& emotion) {
        return aggregate_matrix(weights, emotion);
      },
      py::arg("weights"), py::arg("emotion"));

  py::class_<CramerResult>(m, "CramerResult")
      .def_readonly("statistic", &CramerResult::statistic)
      .def_readonly("critical_value", &CramerResult::critical_value)
      .def_readonly("p_value", &CramerResult::p_value)
      .def_readonly("alpha", &CramerResult::alpha)
      .def_readonly("n_permutations", &CramerResult::n_permutations)
      .def_readonly("reject", &CramerResult::reject);
  m.def("cramer_statistic", &cramer_statistic, py::arg("x"), py::arg("y"));
  m.def("cramer_test", &cramer_test, py::arg("x"), py::arg("y"), py::arg("alpha") = 0.05,
        py::arg("n_permutations") = 1000, py::arg("seed") = 0);
}
