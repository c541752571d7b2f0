#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vlqa {

enum class FusionMode { kConcat, kScalarAttn, kHierarchical };

std::string FusionModeName(FusionMode mode);
// Accepts concat, scalar, scalar-attn, hier, hierarchical.
FusionMode ParseFusionMode(const std::string& name);

struct OptimizerConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t epochs = 50;
  double clip_norm = 5.0;  // 0 disables
  std::string schedule = "cosine";  // constant | cosine

  bool operator==(const OptimizerConfig&) const = default;
};

struct DataConfig {
  std::string dataset_dir = "data";
  std::size_t count = 2500;
  double noise_level = 0.0;
  std::size_t holdout = 500;       // last samples of the corpus
  std::string eval_split = "holdout";  // holdout | train | all

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  std::vector<std::size_t> feature_widths{9, 4};  // K_s, S = size()
  std::size_t channels = 8;                      // C
  std::size_t dim = 16;                          // D
  std::size_t answer_dim = 12;                   // D_a
  double gamma = 0.5;
  std::size_t refine_rounds = 2;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  DataConfig data;
  FusionMode fusion = FusionMode::kHierarchical;
  std::string checkpoint = "model.ckpt";
  bool ablation_retrain = true;
  double answer_embedding_weight = 0.2;

  bool operator==(const RunConfig&) const = default;
};

// Throws a configuration error naming the offending field.
void Validate(const RunConfig& config);

nlohmann::json ConfigToJson(const RunConfig& config);
// Missing keys take defaults; unknown keys are rejected.
RunConfig ConfigFromJson(const nlohmann::json& j);

RunConfig LoadConfig(const std::filesystem::path& path);
void SaveConfig(const std::filesystem::path& path, const RunConfig& config);

}  // namespace vlqa
