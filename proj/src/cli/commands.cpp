#include "bandlime/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "bandlime/audio.hpp"
#include "bandlime/band_energy_model.hpp"
#include "bandlime/error.hpp"
#include "bandlime/explainer.hpp"
#include "bandlime/external_predictor.hpp"
#include "bandlime/formats.hpp"
#include "bandlime/render.hpp"
#include "bandlime/spectral.hpp"
#include "bandlime/stats.hpp"

namespace bandlime::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t n_samples = 1000;
  double kernel_width = 0.25;
  double ridge_lambda = 1.0;
  std::size_t components = 8;
  std::size_t window = 1024;
  std::size_t hop = 256;
  std::size_t threads = 1;
  long timeout_ms = 30000;

  StftParams stft() const {
    StftParams p;
    p.window_len = window;
    p.hop_len = hop;
    p.validate();
    return p;
  }

  ExplainerConfig explainer(std::uint64_t clip_seed) const {
    ExplainerConfig c;
    c.n_components = components;
    c.n_samples = n_samples;
    c.kernel_width = kernel_width;
    c.ridge_lambda = ridge_lambda;
    c.seed = clip_seed;
    c.stft = stft();
    c.threads = threads;
    c.validate();
    return c;
  }
};

/// builtin:<model.json> | exec:<command line> | constant:<value>:<label,label,...>
std::unique_ptr<Predictor> make_predictor(const std::string& descriptor, const GlobalOptions& g) {
  const auto colon = descriptor.find(':');
  if (colon == std::string::npos) {
    throw InvalidArgument("model descriptor must be builtin:<model.json>, exec:<command> or "
                          "constant:<value>:<labels>, got '" + descriptor + "'");
  }
  const std::string scheme = descriptor.substr(0, colon);
  const std::string rest = descriptor.substr(colon + 1);
  if (scheme == "builtin") {
    return std::make_unique<BandEnergyModel>(
        io::model_from_json(io::read_json_file(rest, io::kModelKind)));
  }
  if (scheme == "exec") {
    ExternalPredictor::Options options;
    options.timeout = std::chrono::milliseconds(g.timeout_ms);
    return std::make_unique<ExternalPredictor>(rest, options);
  }
  if (scheme == "constant") {
    const auto sep = rest.find(':');
    if (sep == std::string::npos) throw InvalidArgument("constant predictor needs value:labels");
    double value = 0.0;
    try {
      value = std::stod(rest.substr(0, sep));
    } catch (const std::exception&) {
      throw InvalidArgument("constant predictor value is not a number");
    }
    std::vector<std::string> labels;
    std::stringstream ss(rest.substr(sep + 1));
    for (std::string l; std::getline(ss, l, ',');) {
      if (!l.empty()) labels.push_back(l);
    }
    return std::make_unique<ConstantPredictor>(std::move(labels), value);
  }
  throw InvalidArgument("unknown model scheme '" + scheme + "'");
}

std::string format_weights(const std::vector<double>& w) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6);
  for (std::size_t k = 0; k < w.size(); ++k) s << (k ? " " : "") << w[k];
  return s.str();
}

std::size_t argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

// Per-clip seeds differ so perturbations are not shared across clips, and are
// independent of evaluation order.
std::uint64_t clip_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ static_cast<std::uint64_t>(index);
}

// ---------------------------------------------------------------- synth

struct SynthClass {
  std::string label;
  std::vector<double> profile;
  std::size_t clips = 0;
  double duration_s = 1.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir, const GlobalOptions& g,
              std::ostream& out) {
  const json spec = [&] {
    std::ifstream in(spec_path);
    if (!in) throw FileNotFound("cannot open synth spec " + spec_path.string());
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw InvalidArgument("synth spec is not valid JSON: " + std::string(e.what()));
    }
  }();

  int sample_rate = 16000;
  std::size_t components = g.components;
  std::vector<SynthClass> classes;
  try {
    sample_rate = spec.value("sample_rate_hz", 16000);
    components = spec.value("components", g.components);
    for (const auto& c : spec.at("classes")) {
      SynthClass sc;
      sc.label = c.at("label").get<std::string>();
      sc.profile = c.at("profile").get<std::vector<double>>();
      sc.clips = c.at("clips").get<std::size_t>();
      sc.duration_s = c.value("duration_s", 1.0);
      sc.seed = c.value("seed", std::uint64_t{0});
      classes.push_back(std::move(sc));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid synth spec: " + std::string(e.what()));
  }
  if (classes.empty()) throw InvalidArgument("synth spec lists no classes");
  for (const auto& c : classes) {
    if (c.label.empty() || c.label.find_first_of(",/\\\n") != std::string::npos) {
      throw InvalidArgument("invalid class label '" + c.label + "'");
    }
    if (std::count_if(classes.begin(), classes.end(),
                      [&](const SynthClass& o) { return o.label == c.label; }) > 1) {
      throw InvalidArgument("duplicate class label '" + c.label + "'");
    }
    if (c.profile.size() != components) {
      throw InvalidArgument("class '" + c.label + "' profile needs " + std::to_string(components) +
                            " entries");
    }
    if (std::any_of(c.profile.begin(), c.profile.end(), [](double p) { return !(p >= 0.0); }) ||
        std::all_of(c.profile.begin(), c.profile.end(), [](double p) { return p == 0.0; })) {
      throw InvalidArgument("class '" + c.label + "' profile must be non-negative and not all zero");
    }
    if (c.clips == 0) throw InvalidArgument("class '" + c.label + "' has no clips");
  }

  const StftParams stft = g.stft();
  const BandLayout layout(stft.n_bins(), components);
  const auto edges = layout.band_edges_hz(sample_rate, stft.window_len);

  std::vector<io::ManifestRow> rows;
  for (const auto& c : classes) {
    std::vector<BandGain> gains;
    for (std::size_t k = 0; k < components; ++k) {
      const double hi = k + 1 == components ? edges[k + 1] : std::nextafter(edges[k + 1], 0.0);
      gains.push_back({edges[k], hi, std::sqrt(c.profile[k])});
    }
    fs::create_directories(out_dir / c.label);
    for (std::size_t i = 0; i < c.clips; ++i) {
      const std::uint64_t seed = c.seed ^ (static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ull);
      const AudioClip clip = synth_shaped_noise(gains, c.duration_s, sample_rate, seed);
      char name[32];
      std::snprintf(name, sizeof name, "%03zu.wav", i);
      const fs::path rel = fs::path(c.label) / name;
      const auto bytes = encode_wav(clip, WavEncoding::float32);
      io::write_file_atomic(out_dir / rel, std::string(bytes.begin(), bytes.end()));
      rows.push_back({rel, c.label});
    }
  }
  io::write_file_atomic(out_dir / "manifest.csv", io::format_manifest(rows));
  out << "wrote " << rows.size() << " clips and " << (out_dir / "manifest.csv").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const fs::path& manifest, const fs::path& out_path, double learning_rate,
              std::size_t epochs, const GlobalOptions& g, std::ostream& out) {
  const auto rows = io::read_manifest(manifest);
  auto labels = io::manifest_labels(rows);
  std::vector<LabeledClip> data;
  for (const auto& r : rows) {
    const auto index = static_cast<std::size_t>(
        std::find(labels.begin(), labels.end(), r.label) - labels.begin());
    data.push_back({read_wav(r.path), index});
  }
  TrainingParams params;
  params.learning_rate = learning_rate;
  params.epochs = epochs;
  params.seed = g.seed;
  params.n_components = g.components;
  params.stft = g.stft();
  const TrainedModel trained = train_band_energy_model(data, labels, params);
  io::write_json_file(out_path, io::with_envelope(io::to_json(trained.model, trained.training_accuracy),
                                                  io::kModelKind));
  out << "training accuracy " << std::fixed << std::setprecision(4) << trained.training_accuracy
      << " on " << data.size() << " clips\n";
  return kOk;
}

// ---------------------------------------------------------------- explain

int cmd_explain(const fs::path& wav, const std::string& model, const std::string& target,
                const fs::path& out_path, const GlobalOptions& g, std::ostream& out) {
  const AudioClip clip = read_wav(wav);
  auto predictor = make_predictor(model, g);
  const Explanation e = explain(clip, *predictor, target, g.explainer(g.seed), wav.string());
  io::write_json_file(out_path, io::with_envelope(io::to_json(e), io::kExplanationKind));
  out << "weights " << format_weights(e.weights) << "\n"
      << "intercept " << std::setprecision(6) << std::fixed << e.intercept << "\n"
      << "score " << e.score << "\n";
  return kOk;
}

// ---------------------------------------------------------------- batch

int cmd_batch(const fs::path& manifest, const std::string& model, const fs::path& out_dir,
              const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto rows = io::read_manifest(manifest);
  auto predictor = make_predictor(model, g);
  for (const auto& label : io::manifest_labels(rows)) predictor->class_index(label);

  std::map<std::string, std::vector<Explanation>> kept;
  std::vector<std::string> order = io::manifest_labels(rows);
  std::ostringstream skipped;
  skipped << "path,label,predicted\n";
  std::size_t n_skipped = 0;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const AudioClip clip = read_wav(row.path);
    const Eigen::MatrixXd scores = predictor->predict(std::span(&clip, 1));
    const std::string predicted = predictor->class_labels()[argmax(scores.row(0).transpose())];
    if (predicted != row.label) {
      skipped << row.path.generic_string() << ',' << row.label << ',' << predicted << '\n';
      ++n_skipped;
      continue;
    }
    Explanation e = explain(clip, *predictor, row.label, g.explainer(clip_seed(g.seed, i)),
                            row.path.generic_string());
    char name[64];
    std::snprintf(name, sizeof name, "%04zu_%s.json", i, row.path.stem().string().c_str());
    io::write_json_file(out_dir / "explanations" / row.label / name,
                        io::with_envelope(io::to_json(e), io::kExplanationKind));
    kept[row.label].push_back(std::move(e));
  }

  json summary = {{"aggregated", json::array()}, {"skipped_emotions", json::array()},
                  {"n_clips", rows.size()}, {"n_misclassified", n_skipped}};
  for (const auto& label : order) {
    const auto it = kept.find(label);
    if (it == kept.end() || it->second.empty()) {
      err << "warning: no correctly classified clips for '" << label << "'; skipped\n";
      summary["skipped_emotions"].push_back(label);
      continue;
    }
    const EmotionAggregate agg = aggregate(it->second, label);
    const fs::path agg_path = out_dir / ("aggregate_" + label + ".json");
    io::write_json_file(agg_path, io::with_envelope(io::to_json(agg), io::kAggregateKind));
    summary["aggregated"].push_back({{"emotion", label},
                                     {"n_utterances", agg.n_utterances()},
                                     {"file", agg_path.filename().string()}});
    out << label << " (" << agg.n_utterances() << " clips): mean " << format_weights(agg.mean_weights)
        << "\n";
  }
  io::write_file_atomic(out_dir / "skipped.csv", skipped.str());
  io::write_json_file(out_dir / "batch.json", io::with_envelope(summary, "batch_summary"));
  if (n_skipped > 0) err << "warning: " << n_skipped << " misclassified clips skipped\n";
  return kOk;
}

// ---------------------------------------------------------------- aggregate

int cmd_aggregate(const std::vector<fs::path>& inputs, const std::string& emotion,
                  const fs::path& out_path, std::ostream& out) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& entry : fs::recursive_directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
      }
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Explanation> explanations;
  for (const auto& f : files) {
    const json doc = io::read_json_file(f, io::kExplanationKind);
    Explanation e = io::explanation_from_json(doc);
    if (e.target_class == emotion) explanations.push_back(std::move(e));
  }
  if (explanations.empty()) {
    throw InvalidArgument("no explanations for '" + emotion + "' among the inputs");
  }
  const EmotionAggregate agg = aggregate(explanations, emotion);
  io::write_json_file(out_path, io::with_envelope(io::to_json(agg), io::kAggregateKind));
  out << emotion << " (" << agg.n_utterances() << " clips): mean " << format_weights(agg.mean_weights)
      << "\n"
      << emotion << " std " << format_weights(agg.std_weights) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- cramer

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::string& range) {
  if (range.empty()) return m;
  const auto colon = range.find(':');
  std::size_t first = 0;
  std::size_t last = static_cast<std::size_t>(m.rows());
  try {
    if (colon == std::string::npos) throw InvalidArgument("");
    if (colon > 0) first = std::stoul(range.substr(0, colon));
    if (colon + 1 < range.size()) last = std::stoul(range.substr(colon + 1));
  } catch (const std::exception&) {
    throw InvalidArgument("row range must look like start:end, got '" + range + "'");
  }
  if (first >= last || last > static_cast<std::size_t>(m.rows())) {
    throw InvalidArgument("row range " + range + " is outside the " + std::to_string(m.rows()) +
                          " available rows");
  }
  return m.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
}

int cmd_cramer(const fs::path& a_path, const fs::path& b_path, const std::string& a_rows,
               const std::string& b_rows, double alpha, std::size_t permutations,
               const fs::path& out_path, const GlobalOptions& g, std::ostream& out) {
  const EmotionAggregate a = io::aggregate_from_json(io::read_json_file(a_path, io::kAggregateKind));
  const EmotionAggregate b = io::aggregate_from_json(io::read_json_file(b_path, io::kAggregateKind));
  if (a.n_components() != b.n_components()) {
    throw InvalidArgument("aggregates differ in component count");
  }
  const Eigen::MatrixXd x = select_rows(a.weights, a_rows);
  const Eigen::MatrixXd y = select_rows(b.weights, b_rows);
  const CramerResult r = cramer_test(x, y, alpha, permutations, g.seed);

  json doc = io::to_json(r);
  doc["sample_a"] = {{"file", a_path.string()}, {"emotion", a.emotion}, {"rows", a_rows},
                     {"n", x.rows()}};
  doc["sample_b"] = {{"file", b_path.string()}, {"emotion", b.emotion}, {"rows", b_rows},
                     {"n", y.rows()}};
  doc["seed"] = g.seed;
  if (!out_path.empty()) io::write_json_file(out_path, io::with_envelope(doc, io::kCramerKind));

  out << std::setprecision(6) << std::fixed << "statistic " << r.statistic << "\n"
      << "critical_value " << r.critical_value << "\n"
      << "p_value " << r.p_value << "\n"
      << "reject " << (r.reject ? "true *" : "false") << "\n";
  return kOk;
}

// ---------------------------------------------------------------- render

int cmd_render(const fs::path& input, const fs::path& out_path, const fs::path& wav_override,
               const RenderSpec& spec, std::ostream& out) {
  const json doc = io::read_json_file(input);
  const std::string kind = doc.value("kind", std::string());
  std::string svg;
  if (kind == io::kExplanationKind) {
    const Explanation e = io::explanation_from_json(doc);
    std::optional<Spectrogram> spectrogram;
    const fs::path wav = wav_override.empty() ? fs::path(e.source_path) : wav_override;
    if (!wav.empty()) spectrogram = stft(read_wav(wav), e.stft);
    svg = render_explanation_svg(e, spectrogram, spec);
  } else if (kind == io::kAggregateKind) {
    svg = render_aggregate_svg(io::aggregate_from_json(doc), spec);
  } else {
    throw InvalidArgument("cannot render a '" + kind + "' document");
  }
  io::write_file_atomic(out_path, svg);
  out << "wrote " << out_path.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Band-masking explanations for audio classifiers"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--n-samples", g.n_samples, "Perturbations per explanation")->capture_default_str();
  app.add_option("--kernel-width", g.kernel_width, "Exponential kernel width")->capture_default_str();
  app.add_option("--ridge-lambda", g.ridge_lambda, "Ridge penalty")->capture_default_str();
  app.add_option("--components", g.components, "Number of frequency bands")->capture_default_str();
  app.add_option("--window", g.window, "STFT window length (power of two)")->capture_default_str();
  app.add_option("--hop", g.hop, "STFT hop length")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for concurrent-safe models (0 = all)")
      ->capture_default_str();
  app.add_option("--timeout-ms", g.timeout_ms, "Per-request timeout for exec: models")
      ->capture_default_str();

  fs::path synth_spec, synth_out;
  auto* synth = app.add_subcommand("synth", "Synthesize a labelled band-noise dataset");
  synth->add_option("--spec", synth_spec, "Dataset spec (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  fs::path train_manifest, train_out;
  double learning_rate = 0.5;
  std::size_t epochs = 500;
  auto* train = app.add_subcommand("train", "Train the built-in band-energy classifier");
  train->add_option("--manifest", train_manifest, "CSV with header path,label")->required();
  train->add_option("--out", train_out, "Model file (JSON)")->required();
  train->add_option("--learning-rate", learning_rate)->capture_default_str();
  train->add_option("--epochs", epochs)->capture_default_str();

  fs::path explain_wav, explain_out;
  std::string model, target;
  auto* explain_cmd = app.add_subcommand("explain", "Explain one clip");
  explain_cmd->add_option("wav", explain_wav, "Input WAV")->required();
  explain_cmd->add_option("--model", model, "builtin:<model.json> | exec:<command> | constant:<v>:<labels>")
      ->required();
  explain_cmd->add_option("--target", target, "Class to explain")->required();
  explain_cmd->add_option("--out", explain_out, "Explanation file (JSON)")->required();

  fs::path batch_manifest, batch_out;
  auto* batch = app.add_subcommand("batch", "Explain correctly classified clips and aggregate per class");
  batch->add_option("--manifest", batch_manifest)->required();
  batch->add_option("--model", model)->required();
  batch->add_option("--out", batch_out, "Output directory")->required();

  std::vector<fs::path> agg_inputs;
  std::string emotion;
  fs::path agg_out;
  auto* agg = app.add_subcommand("aggregate", "Aggregate explanation files for one class");
  agg->add_option("inputs", agg_inputs, "Explanation files or directories")->required();
  agg->add_option("--emotion", emotion, "Target class to aggregate")->required();
  agg->add_option("--out", agg_out)->required();

  fs::path cramer_a, cramer_b, cramer_out;
  std::string a_rows, b_rows;
  double alpha = 0.05;
  std::size_t permutations = 1000;
  auto* cramer = app.add_subcommand("cramer", "Two-sample Cramer test between aggregates");
  cramer->add_option("a", cramer_a)->required();
  cramer->add_option("b", cramer_b)->required();
  cramer->add_option("--a-rows", a_rows, "Row range start:end of sample A");
  cramer->add_option("--b-rows", b_rows, "Row range start:end of sample B");
  cramer->add_option("--alpha", alpha)->capture_default_str();
  cramer->add_option("--permutations", permutations)->capture_default_str();
  cramer->add_option("--out", cramer_out, "Result file (JSON)");

  fs::path render_in, render_out, render_wav;
  RenderSpec render_spec;
  bool no_annotate = false;
  auto* render = app.add_subcommand("render", "Render an explanation or aggregate as SVG");
  render->add_option("input", render_in)->required();
  render->add_option("--out", render_out)->required();
  render->add_option("--wav", render_wav, "Audio for the spectrogram (defaults to the recorded source)");
  render->add_option("--positive-color", render_spec.positive_color)->capture_default_str();
  render->add_option("--negative-color", render_spec.negative_color)->capture_default_str();
  render->add_flag("--no-annotate", no_annotate, "Omit weight labels");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadArguments;
  }

  try {
    if (*synth) return cmd_synth(synth_spec, synth_out, g, out);
    if (*train) return cmd_train(train_manifest, train_out, learning_rate, epochs, g, out);
    if (*explain_cmd) return cmd_explain(explain_wav, model, target, explain_out, g, out);
    if (*batch) return cmd_batch(batch_manifest, model, batch_out, g, out, err);
    if (*agg) return cmd_aggregate(agg_inputs, emotion, agg_out, out);
    if (*cramer) {
      return cmd_cramer(cramer_a, cramer_b, a_rows, b_rows, alpha, permutations, cramer_out, g, out);
    }
    if (*render) {
      render_spec.annotate_weights = !no_annotate;
      return cmd_render(render_in, render_out, render_wav, render_spec, out);
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const SingularSystem& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const PredictorError& e) {
    err << "predictor error: " << e.what() << "\n";
    return kPredictorFailure;
  } catch (const NumericalError& e) {
    err << "predictor error: " << e.what() << "\n";
    return kPredictorFailure;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kBadArguments;
}

}  // namespace bandlime::cli
