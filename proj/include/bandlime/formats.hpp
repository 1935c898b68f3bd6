#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bandlime/band_energy_model.hpp"
#include "bandlime/explainer.hpp"
#include "bandlime/stats.hpp"

namespace bandlime::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

using nlohmann::json;

/// Document `kind` tags.
inline constexpr const char* kExplanationKind = "explanation";
inline constexpr const char* kAggregateKind = "aggregate";
inline constexpr const char* kCramerKind = "cramer_result";
inline constexpr const char* kModelKind = "band_energy_model";

/// Stamp written into created_at. Honours SOURCE_DATE_EPOCH for reproducible
/// output, otherwise the current UTC time.
std::string timestamp_utc();

json to_json(const Explanation& e);
Explanation explanation_from_json(const json& j);

json to_json(const EmotionAggregate& a);
EmotionAggregate aggregate_from_json(const json& j);

json to_json(const CramerResult& r);
CramerResult cramer_from_json(const json& j);

json to_json(const BandEnergyModel& m, double training_accuracy);
BandEnergyModel model_from_json(const json& j);

/// Adds schema_version, kind, created_at and tool_version.
json with_envelope(json body, const char* kind);

/// Throws IoError for unreadable or malformed files, a wrong schema_version or,
/// when given, a different kind.
json read_json_file(const std::filesystem::path& path, const char* expected_kind = nullptr);

/// Creates missing parent directories, writes a sibling temporary file and
/// renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_json_file(const std::filesystem::path& path, const json& doc);

struct ManifestRow {
  std::filesystem::path path;
  std::string label;
};

/// CSV with header `path,label`. Relative paths resolve against the manifest's
/// directory.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest);
std::string format_manifest(const std::vector<ManifestRow>& rows);

/// Distinct labels in first-appearance order.
std::vector<std::string> manifest_labels(const std::vector<ManifestRow>& rows);

}  // namespace bandlime::io
