#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlqa/dataset.h"

// On-disk corpus: <dir>/samples.jsonl (one record per line) and
// <dir>/manifest.json. Tree leaves store token strings, not ids.
namespace vlqa {

inline constexpr const char* kSamplesFile = "samples.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

struct Dataset {
  Manifest manifest;
  std::vector<SampleRecord> samples;
};

nlohmann::json ManifestToJson(const Manifest& manifest);
Manifest ManifestFromJson(const nlohmann::json& j);

nlohmann::json SampleToJson(const SampleRecord& sample, const Manifest& manifest);
// Records without a tree get a right-branching parse of the question.
SampleRecord SampleFromJson(const nlohmann::json& j, const Manifest& manifest);

void WriteDataset(const std::filesystem::path& dir, const Manifest& manifest,
                  const std::vector<SampleRecord>& samples);
Manifest ReadManifest(const std::filesystem::path& dir);
Dataset ReadDataset(const std::filesystem::path& dir);

// Compact one-line form used for JSONL; Pretty for standalone documents.
std::string DumpLine(const nlohmann::json& j);
std::string DumpPretty(const nlohmann::json& j);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

}  // namespace vlqa
