#include "bandlime/external_predictor.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "bandlime/error.hpp"
#include "bandlime/explainer.hpp"

namespace bandlime {
namespace {

using namespace std::chrono_literals;

std::string stub(const std::string& mode) { return std::string(PROTOCOL_STUB) + " " + mode; }

std::vector<AudioClip> clips(std::size_t n) {
  std::vector<AudioClip> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> s(100 + i, 0.0f);
    s[0] = static_cast<float>(i) / 8.0f;
    out.emplace_back(std::move(s), 16000);
  }
  return out;
}

TEST(Base64, KnownEncoding) {
  const std::vector<float> one{1.0f};
  EXPECT_EQ(encode_samples_b64(one), "AACAPw==");
  EXPECT_EQ(decode_samples_b64("AACAPw=="), one);
  EXPECT_EQ(encode_samples_b64({}), "");
  EXPECT_TRUE(decode_samples_b64("").empty());
}

TEST(Base64, RoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (std::size_t n : {1u, 2u, 3u, 7u, 1000u}) {
    std::vector<float> s(n);
    for (float& v : s) v = u(rng);
    EXPECT_EQ(decode_samples_b64(encode_samples_b64(s)), s);
  }
}

TEST(Base64, Malformed) {
  EXPECT_THROW(decode_samples_b64("AACAPw="), InvalidArgument);
  EXPECT_THROW(decode_samples_b64("AAC*Pw=="), InvalidArgument);
  EXPECT_THROW(decode_samples_b64("AAA="), InvalidArgument);
}

TEST(ExternalPredictor, HandshakeAndUniformScores) {
  ExternalPredictor p(stub("uniform"));
  EXPECT_EQ(p.class_labels(), (std::vector<std::string>{"neutral", "happy", "sad"}));
  EXPECT_FALSE(p.concurrent_safe());
  const Eigen::MatrixXd out = p.predict(clips(20));
  ASSERT_EQ(out.rows(), 20);
  ASSERT_EQ(out.cols(), 3);
  EXPECT_TRUE(out.isApproxToConstant(1.0 / 3.0, 1e-12));
  EXPECT_EQ(p.predict(clips(3)).rows(), 3);
  EXPECT_EQ(p.predict({}).rows(), 0);
}

TEST(ExternalPredictor, SamplesSurviveTheWire) {
  ExternalPredictor p(stub("echo"));
  const auto batch = clips(12);
  const Eigen::MatrixXd out = p.predict(batch);
  for (Eigen::Index i = 0; i < 12; ++i) {
    EXPECT_EQ(out(i, 0), 16000.0);
    EXPECT_EQ(out(i, 1), static_cast<double>(batch[i].size()));
    EXPECT_EQ(out(i, 2), batch[i].samples()[0]);
  }
}

TEST(ExternalPredictor, OutOfOrderAnswersLandInRequestOrder) {
  ExternalPredictor p(stub("reverse"));
  const auto batch = clips(30);
  const Eigen::MatrixXd out = p.predict(batch);
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_EQ(out(i, 1), static_cast<double>(batch[i].size()));
}

TEST(ExternalPredictor, UnknownFieldsAreIgnored) {
  ExternalPredictor p(stub("extra-fields"));
  EXPECT_TRUE(p.predict(clips(4)).isApproxToConstant(1.0 / 3.0, 1e-12));
}

TEST(ExternalPredictor, Violations) {
  {
    ExternalPredictor p(stub("wrong-length"));
    try {
      p.predict(clips(2));
      FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
      EXPECT_EQ(e.request_id(), std::optional<std::uint64_t>(0));
      EXPECT_NE(std::string(e.what()).find("request 0"), std::string::npos);
    }
  }
  {
    ExternalPredictor p(stub("unknown-id"));
    EXPECT_THROW(p.predict(clips(1)), ProtocolError);
  }
  {
    ExternalPredictor p(stub("garbage"));
    EXPECT_THROW(p.predict(clips(1)), ProtocolError);
  }
  {
    ExternalPredictor p(stub("reject"));
    try {
      p.predict(clips(1));
      FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
      EXPECT_NE(std::string(e.what()).find("refused"), std::string::npos);
    }
  }
  EXPECT_THROW(ExternalPredictor{stub("bad-hello")}, ProtocolError);
}

TEST(ExternalPredictor, ProcessFailures) {
  EXPECT_THROW(ExternalPredictor{"/nonexistent/model --serve"}, SpawnError);
  EXPECT_THROW(ExternalPredictor{stub("no-hello")}, SpawnError);
  ExternalPredictor p(stub("crash"));
  try {
    p.predict(clips(1));
    FAIL() << "expected PredictorError";
  } catch (const ProtocolError&) {
    FAIL() << "a crash is not a protocol violation";
  } catch (const PredictorError&) {
  }
  EXPECT_THROW(p.predict(clips(1)), PredictorError);
}

TEST(ExternalPredictor, Timeout) {
  ExternalPredictor p(stub("silent"), {.timeout = 300ms, .max_in_flight = 8});
  const auto start = std::chrono::steady_clock::now();
  try {
    p.predict(clips(3));
    FAIL() << "expected PredictorTimeout";
  } catch (const PredictorTimeout& e) {
    EXPECT_EQ(e.index(), std::optional<std::size_t>(0));
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(ExternalPredictor, ExplainWithUniformModelIsFlat) {
  ExternalPredictor p(stub("uniform"));
  ExplainerConfig c;
  c.n_samples = 100;
  const Explanation e = explain(synth_band_noise(0, 8000, 0.3, 16000, 1), p, "happy", c);
  for (double w : e.weights) EXPECT_NEAR(w, 0.0, 1e-12);
  EXPECT_NEAR(e.intercept, 1.0 / 3.0, 1e-12);
}

TEST(ExternalPredictor, ExplainFindsBandThree) {
  ExternalPredictor p(stub("band3"));
  ExplainerConfig c;
  c.n_samples = 300;
  const Explanation e = explain(synth_band_noise(0, 8000, 0.5, 16000, 2), p, "neutral", c);
  EXPECT_EQ(std::max_element(e.weights.begin(), e.weights.end()) - e.weights.begin(), 3);
}

TEST(ExternalPredictor, ExplainReportsMaskIndexOnViolation) {
  ExternalPredictor p(stub("wrong-length"));
  ExplainerConfig c;
  c.n_samples = 20;
  try {
    explain(synth_tone(500, 0.2, 16000), p, "sad", c);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.index(), std::optional<std::size_t>(0));
  }
}

}  // namespace
}  // namespace bandlime
