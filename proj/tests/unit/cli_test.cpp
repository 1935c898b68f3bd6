#include "bandlime/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "bandlime/audio.hpp"
#include "bandlime/formats.hpp"
#include "oracles.hpp"
#include "svg.hpp"

namespace bandlime {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "bandlime");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("bandlime_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // Two classes with all their power in band 1 and band 5 respectively.
  fs::path write_spec(std::size_t clips, double duration = 0.25) const {
    io::json spec = {{"sample_rate_hz", 16000}, {"classes", io::json::array()}};
    for (auto [label, band, seed] : {std::tuple{"calm", 1, 11}, std::tuple{"tense", 5, 22}}) {
      std::vector<double> profile(8, 0.0);
      profile[band] = 1.0;
      spec["classes"].push_back({{"label", label}, {"profile", profile}, {"clips", clips},
                                 {"duration_s", duration}, {"seed", seed}});
    }
    std::ofstream(path("spec.json")) << spec.dump();
    return path("spec.json");
  }

  fs::path dir_;
};

TEST_F(CliTest, ArgumentErrors) {
  EXPECT_EQ(run({}).code, cli::kBadArguments);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kBadArguments);
  EXPECT_EQ(run({"synth", "--bogus"}).code, cli::kBadArguments);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
  EXPECT_EQ(run({"--window", "1000", "synth", "--spec", write_spec(1).string(), "--out",
                 path("d").string()}).code,
            cli::kBadArguments);
}

TEST_F(CliTest, MissingInputIsIoFailure) {
  const Result r = run({"explain", path("absent.wav").string(), "--model", "constant:0.5:a,b",
                        "--target", "a", "--out", path("e.json").string()});
  EXPECT_EQ(r.code, cli::kIoFailure);
  EXPECT_NE(r.err.find("absent.wav"), std::string::npos);
  EXPECT_EQ(run({"synth", "--spec", path("absent.json").string(), "--out", path("d").string()}).code,
            cli::kIoFailure);
}

TEST_F(CliTest, SynthCountsAndDeterminism) {
  const auto spec = write_spec(10);
  ASSERT_EQ(run({"synth", "--spec", spec.string(), "--out", path("a").string()}).code, 0);
  ASSERT_EQ(run({"synth", "--spec", spec.string(), "--out", path("b").string()}).code, 0);
  const auto rows = io::read_manifest(path("a") / "manifest.csv");
  EXPECT_EQ(rows.size(), 20u);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(path("a"))) files += e.path().extension() == ".wav";
  EXPECT_EQ(files, 20u);
  for (const auto& r : rows) {
    const fs::path rel = fs::relative(r.path, path("a"));
    EXPECT_EQ(slurp(path("a") / rel), slurp(path("b") / rel)) << rel;
  }
}

TEST_F(CliTest, SynthProfileSetsTheDominantBand) {
  ASSERT_EQ(run({"synth", "--spec", write_spec(4).string(), "--out", path("d").string()}).code, 0);
  for (const auto& r : io::read_manifest(path("d") / "manifest.csv")) {
    const AudioClip clip = read_wav(r.path);
    const auto power = testing::direct_dft_power(clip.samples());
    std::vector<double> bands(8, 0.0);
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double hz = k * 16000.0 / static_cast<double>(clip.size());
      bands[std::min<std::size_t>(7, static_cast<std::size_t>(hz / 1000.0))] += power[k];
    }
    const auto best = std::max_element(bands.begin(), bands.end()) - bands.begin();
    EXPECT_EQ(best, r.label == "calm" ? 1 : 5) << r.path;
  }
}

TEST_F(CliTest, ExplainWithConstantModel) {
  write_wav(synth_band_noise(0, 8000, 0.3, 16000, 3), path("x.wav"));
  const std::vector<std::string> args{"--n-samples", "100", "explain", path("x.wav").string(),
                                      "--model", "constant:0.7:calm,tense", "--target", "tense",
                                      "--out", path("e.json").string()};
  const Result r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("weights "), std::string::npos);
  const auto doc = io::read_json_file(path("e.json"), io::kExplanationKind);
  for (double w : doc.at("weights")) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(doc.at("target_class"), "tense");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(io::read_json_file(path("e.json")).at("weights"), doc.at("weights"));

  EXPECT_EQ(run({"explain", path("x.wav").string(), "--model", "constant:0.7:calm,tense", "--target",
                 "happy", "--out", path("f.json").string()}).code,
            cli::kBadArguments);
  EXPECT_EQ(run({"explain", path("x.wav").string(), "--model", "svm:model.pkl", "--target", "calm",
                 "--out", path("f.json").string()}).code,
            cli::kBadArguments);
}

TEST_F(CliTest, PredictorFailureLeavesNoOutput) {
  write_wav(synth_tone(440, 0.2, 16000), path("x.wav"));
  const Result r = run({"explain", path("x.wav").string(), "--model",
                        std::string("exec:") + PROTOCOL_STUB + " crash", "--target", "happy", "--out",
                        path("e.json").string()});
  EXPECT_EQ(r.code, cli::kPredictorFailure);
  EXPECT_FALSE(fs::exists(path("e.json")));
  EXPECT_EQ(run({"--timeout-ms", "200", "explain", path("x.wav").string(), "--model",
                 std::string("exec:") + PROTOCOL_STUB + " silent", "--target", "happy", "--out",
                 path("e.json").string()}).code,
            cli::kPredictorFailure);
}

TEST_F(CliTest, BatchSkipsMisclassifiedEmotion) {
  ASSERT_EQ(run({"synth", "--spec", write_spec(3).string(), "--out", path("d").string()}).code, 0);
  // The constant model always predicts its first label.
  const Result r = run({"--n-samples", "50", "batch", "--manifest", (path("d") / "manifest.csv").string(),
                        "--model", "constant:0.5:calm,tense", "--out", path("b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning: no correctly classified clips for 'tense'"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("b") / "aggregate_calm.json"));
  EXPECT_FALSE(fs::exists(path("b") / "aggregate_tense.json"));
  const auto summary = io::read_json_file(path("b") / "batch.json");
  EXPECT_EQ(summary.at("skipped_emotions"), io::json::array({"tense"}));
  std::istringstream skipped(slurp(path("b") / "skipped.csv"));
  std::size_t lines = 0;
  for (std::string l; std::getline(skipped, l);) ++lines;
  EXPECT_EQ(lines, 4u);
}

TEST_F(CliTest, AggregateMatchesFilesAndCramerSelfDoesNotReject) {
  ASSERT_EQ(run({"synth", "--spec", write_spec(4).string(), "--out", path("d").string()}).code, 0);
  ASSERT_EQ(run({"train", "--manifest", (path("d") / "manifest.csv").string(), "--out",
                 path("m.json").string()}).code,
            0);
  const std::string model = "builtin:" + path("m.json").string();
  ASSERT_EQ(run({"--n-samples", "100", "batch", "--manifest", (path("d") / "manifest.csv").string(),
                 "--model", model, "--out", path("b").string()}).code,
            0);

  const fs::path dir = path("b") / "explanations" / "calm";
  std::vector<std::vector<double>> rows;
  for (const auto& e : fs::directory_iterator(dir)) {
    rows.push_back(io::read_json_file(e.path()).at("weights").get<std::vector<double>>());
  }
  ASSERT_EQ(rows.size(), 4u);
  ASSERT_EQ(run({"aggregate", dir.string(), "--emotion", "calm", "--out", path("agg.json").string()}).code, 0);
  const auto agg = io::read_json_file(path("agg.json"), io::kAggregateKind);
  const auto batch_agg = io::read_json_file(path("b") / "aggregate_calm.json");
  EXPECT_EQ(agg.at("mean_weights"), batch_agg.at("mean_weights"));
  for (std::size_t k = 0; k < 8; ++k) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[k];
    EXPECT_NEAR(agg.at("mean_weights")[k].get<double>(), sum / 4.0, 1e-12);
  }

  const Result self = run({"cramer", path("agg.json").string(), path("agg.json").string(), "--out",
                           path("c.json").string()});
  ASSERT_EQ(self.code, 0) << self.err;
  const auto c = io::read_json_file(path("c.json"), io::kCramerKind);
  EXPECT_FALSE(c.at("reject").get<bool>());
  EXPECT_EQ(c.at("statistic").get<double>(), 0.0);
  EXPECT_EQ(run({"cramer", path("agg.json").string(), path("agg.json").string(), "--a-rows", "0:9"}).code,
            cli::kBadArguments);
}

TEST_F(CliTest, RenderBothKinds) {
  write_wav(synth_band_noise(0, 8000, 0.3, 16000, 5), path("x.wav"));
  ASSERT_EQ(run({"--n-samples", "50", "explain", path("x.wav").string(), "--model", "constant:1:a,b",
                 "--target", "a", "--out", path("e.json").string()}).code,
            0);
  ASSERT_EQ(run({"render", path("e.json").string(), "--out", path("e.svg").string()}).code, 0);
  const auto svg = testing::parse_svg(slurp(path("e.svg")));
  EXPECT_EQ(testing::elements(svg, "rect", "band-stripe").size(), 8u);
  EXPECT_FALSE(testing::elements(svg, "g", "heatmap").empty());

  EXPECT_EQ(run({"render", path("e.json").string(), "--out", path("f.svg").string(), "--positive-color",
                 "green"}).code,
            cli::kBadArguments);
  EXPECT_FALSE(fs::exists(path("f.svg")));
}

}  // namespace
}  // namespace bandlime
