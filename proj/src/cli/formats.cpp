#include "bandlime/formats.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "bandlime/error.hpp"

namespace bandlime::io {

namespace {

json stft_to_json(const StftParams& p) {
  return {{"window_len", p.window_len}, {"hop_len", p.hop_len}, {"window", "hann"}};
}

StftParams stft_from_json(const json& j) {
  StftParams p;
  p.window_len = j.at("window_len").get<std::size_t>();
  p.hop_len = j.at("hop_len").get<std::size_t>();
  if (j.value("window", std::string("hann")) != "hann") {
    throw InvalidArgument("unsupported window '" + j.at("window").get<std::string>() + "'");
  }
  p.validate();
  return p;
}

template <typename Fn>
auto parse_guard(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("invalid ") + what + " document: " + e.what());
  }
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string timestamp_utc() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json with_envelope(json body, const char* kind) {
  body["schema_version"] = kSchemaVersion;
  body["kind"] = kind;
  body["created_at"] = timestamp_utc();
  body["tool_version"] = kToolVersion;
  return body;
}

json to_json(const Explanation& e) {
  return {
      {"target_class", e.target_class},
      {"weights", e.weights},
      {"intercept", e.intercept},
      {"score", e.score},
      {"band_edges_hz", e.band_edges_hz},
      {"sample_rate_hz", e.sample_rate_hz},
      {"source", e.source_path},
      {"config",
       {{"n_samples", e.n_samples},
        {"kernel_width", e.kernel_width},
        {"ridge_lambda", e.ridge_lambda},
        {"seed", e.seed},
        {"n_components", e.weights.size()},
        {"stft", stft_to_json(e.stft)}}},
  };
}

Explanation explanation_from_json(const json& j) {
  return parse_guard("explanation", [&] {
    Explanation e;
    e.target_class = j.at("target_class").get<std::string>();
    e.weights = j.at("weights").get<std::vector<double>>();
    e.intercept = j.at("intercept").get<double>();
    e.score = j.at("score").get<double>();
    e.band_edges_hz = j.at("band_edges_hz").get<std::vector<double>>();
    e.sample_rate_hz = j.at("sample_rate_hz").get<int>();
    e.source_path = j.value("source", std::string());
    const json& c = j.at("config");
    e.n_samples = c.at("n_samples").get<std::size_t>();
    e.kernel_width = c.at("kernel_width").get<double>();
    e.ridge_lambda = c.at("ridge_lambda").get<double>();
    e.seed = c.at("seed").get<std::uint64_t>();
    e.stft = stft_from_json(c.at("stft"));
    if (e.band_edges_hz.size() != e.weights.size() + 1) {
      throw InvalidArgument("explanation needs one more band edge than weights");
    }
    return e;
  });
}

json to_json(const EmotionAggregate& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.weights.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < a.weights.cols(); ++k) row.push_back(a.weights(i, k));
    rows.push_back(row);
  }
  return {
      {"emotion", a.emotion},
      {"n_utterances", a.n_utterances()},
      {"n_components", a.n_components()},
      {"mean_weights", a.mean_weights},
      {"std_weights", a.std_weights},
      {"weights", rows},
      {"sources", a.sources},
  };
}

EmotionAggregate aggregate_from_json(const json& j) {
  return parse_guard("aggregate", [&] {
    EmotionAggregate a;
    a.emotion = j.at("emotion").get<std::string>();
    const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto d = j.at("n_components").get<std::size_t>();
    a.weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != d) throw InvalidArgument("aggregate row has the wrong length");
      for (std::size_t k = 0; k < d; ++k) {
        a.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
    }
    a.mean_weights = j.at("mean_weights").get<std::vector<double>>();
    a.std_weights = j.at("std_weights").get<std::vector<double>>();
    a.sources = j.value("sources", std::vector<std::string>{});
    if (a.mean_weights.size() != d || a.std_weights.size() != d ||
        j.at("n_utterances").get<std::size_t>() != rows.size()) {
      throw InvalidArgument("aggregate summary does not match its weight matrix");
    }
    return a;
  });
}

json to_json(const CramerResult& r) {
  return {{"statistic", r.statistic}, {"critical_value", r.critical_value},
          {"p_value", r.p_value},     {"alpha", r.alpha},
          {"n_permutations", r.n_permutations}, {"reject", r.reject}};
}

CramerResult cramer_from_json(const json& j) {
  return parse_guard("cramer result", [&] {
    CramerResult r;
    r.statistic = j.at("statistic").get<double>();
    r.critical_value = j.at("critical_value").get<double>();
    r.p_value = j.at("p_value").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.n_permutations = j.at("n_permutations").get<std::size_t>();
    r.reject = j.at("reject").get<bool>();
    return r;
  });
}

json to_json(const BandEnergyModel& m, double training_accuracy) {
  json coef = json::array();
  for (Eigen::Index c = 0; c < m.coefficients().rows(); ++c) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < m.coefficients().cols(); ++k) row.push_back(m.coefficients()(c, k));
    coef.push_back(row);
  }
  std::vector<double> bias(m.bias().data(), m.bias().data() + m.bias().size());
  return {{"labels", m.class_labels()},
          {"n_components", m.n_components()},
          {"coefficients", coef},
          {"bias", bias},
          {"stft", stft_to_json(m.stft())},
          {"training_accuracy", training_accuracy}};
}

BandEnergyModel model_from_json(const json& j) {
  return parse_guard("model", [&] {
    auto labels = j.at("labels").get<std::vector<std::string>>();
    const auto rows = j.at("coefficients").get<std::vector<std::vector<double>>>();
    const auto bias = j.at("bias").get<std::vector<double>>();
    const auto d = j.at("n_components").get<std::size_t>();
    Eigen::MatrixXd coef(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != d) throw InvalidArgument("model coefficient row has the wrong length");
      for (std::size_t k = 0; k < d; ++k) {
        coef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = rows[c][k];
      }
    }
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bias.data(),
                                                          static_cast<Eigen::Index>(bias.size()));
    return BandEnergyModel(std::move(labels), std::move(coef), std::move(b),
                           stft_from_json(j.at("stft")));
  });
}

json read_json_file(const std::filesystem::path& path, const char* expected_kind) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("schema_version", -1) != kSchemaVersion) {
    throw IoError(path.string() + ": unsupported or missing schema_version");
  }
  if (expected_kind != nullptr && doc.value("kind", std::string()) != expected_kind) {
    throw IoError(path.string() + ": expected a '" + expected_kind + "' document, found '" +
                  doc.value("kind", std::string()) + "'");
  }
  return doc;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FileNotFound("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,label") {
    throw IoError(manifest.string() + ": manifest must start with the header 'path,label'");
  }
  const auto base = manifest.parent_path();
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size()) {
      throw IoError(manifest.string() + ":" + std::to_string(line_no) + ": expected path,label");
    }
    std::filesystem::path p = trim(line.substr(0, comma));
    if (p.is_relative()) p = base / p;
    rows.push_back({p, trim(line.substr(comma + 1))});
  }
  return rows;
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << "path,label\n";
  for (const auto& r : rows) out << r.path.generic_string() << ',' << r.label << '\n';
  return out.str();
}

std::vector<std::string> manifest_labels(const std::vector<ManifestRow>& rows) {
  std::vector<std::string> labels;
  for (const auto& r : rows) {
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
  }
  return labels;
}

}  // namespace bandlime::io
