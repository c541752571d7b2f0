#include "vlqa/config.h"

#include <cmath>
#include <set>

#include "vlqa/dataset_io.h"
#include "vlqa/errors.h"

namespace vlqa {
namespace {

using nlohmann::json;

void RejectUnknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::kConfiguration, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::kConfiguration, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfiguration, where + "." + key + ": " + e.what());
  }
}

void Positive(std::size_t v, const std::string& name) {
  if (v == 0) throw Error(ErrorKind::kConfiguration, name + " must be positive");
}

void FiniteNonNegative(double v, const std::string& name) {
  if (!std::isfinite(v) || v < 0) throw Error(ErrorKind::kConfiguration, name + " must be finite and >= 0");
}

}  // namespace

std::string FusionModeName(FusionMode mode) {
  switch (mode) {
    case FusionMode::kConcat: return "concat";
    case FusionMode::kScalarAttn: return "scalar";
    case FusionMode::kHierarchical: return "hier";
  }
  return "hier";
}

FusionMode ParseFusionMode(const std::string& name) {
  if (name == "concat") return FusionMode::kConcat;
  if (name == "scalar" || name == "scalar-attn") return FusionMode::kScalarAttn;
  if (name == "hier" || name == "hierarchical") return FusionMode::kHierarchical;
  throw Error(ErrorKind::kConfiguration, "unknown fusion mode '" + name + "' (expected concat, scalar or hier)");
}

void Validate(const RunConfig& c) {
  if (c.feature_widths.empty()) throw Error(ErrorKind::kConfiguration, "dims.K needs at least one scale");
  for (std::size_t s = 0; s < c.feature_widths.size(); ++s) Positive(c.feature_widths[s], "dims.K[" + std::to_string(s) + "]");
  Positive(c.channels, "dims.C");
  Positive(c.dim, "dims.D");
  Positive(c.answer_dim, "dims.D_a");
  Positive(c.refine_rounds, "refine_rounds");
  FiniteNonNegative(c.gamma, "gamma");
  FiniteNonNegative(c.optimizer.learning_rate, "optimizer.learning_rate");
  FiniteNonNegative(c.optimizer.clip_norm, "optimizer.clip_norm");
  if (!std::isfinite(c.optimizer.momentum) || c.optimizer.momentum < 0 || c.optimizer.momentum >= 1) {
    throw Error(ErrorKind::kConfiguration, "optimizer.momentum must lie in [0, 1)");
  }
  Positive(c.optimizer.batch_size, "optimizer.batch_size");
  if (c.optimizer.schedule != "constant" && c.optimizer.schedule != "cosine") {
    throw Error(ErrorKind::kConfiguration, "optimizer.schedule must be constant or cosine");
  }
  FiniteNonNegative(c.data.noise_level, "data.noise_level");
  FiniteNonNegative(c.answer_embedding_weight, "answer_embedding_weight");
  if (c.data.count > 0 && c.data.holdout >= c.data.count) throw Error(ErrorKind::kConfiguration, "data.holdout must be below data.count");
  if (c.data.eval_split != "holdout" && c.data.eval_split != "train" && c.data.eval_split != "all") {
    throw Error(ErrorKind::kConfiguration, "data.eval_split must be holdout, train or all");
  }
}

json ConfigToJson(const RunConfig& c) {
  return {
      {"dims",
       {{"S", c.feature_widths.size()}, {"K", c.feature_widths}, {"C", c.channels}, {"D", c.dim}, {"D_a", c.answer_dim}}},
      {"gamma", c.gamma},
      {"refine_rounds", c.refine_rounds},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"momentum", c.optimizer.momentum},
        {"batch_size", c.optimizer.batch_size},
        {"epochs", c.optimizer.epochs},
        {"clip_norm", c.optimizer.clip_norm},
        {"schedule", c.optimizer.schedule}}},
      {"seed", c.seed},
      {"data",
       {{"dataset_dir", c.data.dataset_dir},
        {"count", c.data.count},
        {"noise_level", c.data.noise_level},
        {"holdout", c.data.holdout},
        {"eval_split", c.data.eval_split}}},
      {"fusion", FusionModeName(c.fusion)},
      {"checkpoint", c.checkpoint},
      {"ablation_retrain", c.ablation_retrain},
      {"answer_embedding_weight", c.answer_embedding_weight},
  };
}

RunConfig ConfigFromJson(const json& j) {
  RunConfig c;
  RejectUnknown(j, {"dims", "gamma", "refine_rounds", "optimizer", "seed", "data", "fusion", "checkpoint",
                    "ablation_retrain", "answer_embedding_weight"},
                "config");
  if (auto d = j.find("dims"); d != j.end()) {
    RejectUnknown(*d, {"S", "K", "C", "D", "D_a"}, "dims");
    Read(*d, "K", c.feature_widths, "dims");
    Read(*d, "C", c.channels, "dims");
    Read(*d, "D", c.dim, "dims");
    Read(*d, "D_a", c.answer_dim, "dims");
    std::size_t s = c.feature_widths.size();
    Read(*d, "S", s, "dims");
    if (s != c.feature_widths.size()) throw Error(ErrorKind::kConfiguration, "dims.S disagrees with the length of dims.K");
  }
  Read(j, "gamma", c.gamma, "config");
  Read(j, "refine_rounds", c.refine_rounds, "config");
  if (auto o = j.find("optimizer"); o != j.end()) {
    RejectUnknown(*o, {"learning_rate", "momentum", "batch_size", "epochs", "clip_norm", "schedule"}, "optimizer");
    Read(*o, "learning_rate", c.optimizer.learning_rate, "optimizer");
    Read(*o, "momentum", c.optimizer.momentum, "optimizer");
    Read(*o, "batch_size", c.optimizer.batch_size, "optimizer");
    Read(*o, "epochs", c.optimizer.epochs, "optimizer");
    Read(*o, "clip_norm", c.optimizer.clip_norm, "optimizer");
    Read(*o, "schedule", c.optimizer.schedule, "optimizer");
  }
  Read(j, "seed", c.seed, "config");
  if (auto d = j.find("data"); d != j.end()) {
    RejectUnknown(*d, {"dataset_dir", "count", "noise_level", "holdout", "eval_split"}, "data");
    Read(*d, "dataset_dir", c.data.dataset_dir, "data");
    Read(*d, "count", c.data.count, "data");
    Read(*d, "noise_level", c.data.noise_level, "data");
    Read(*d, "holdout", c.data.holdout, "data");
    Read(*d, "eval_split", c.data.eval_split, "data");
  }
  std::string fusion = FusionModeName(c.fusion);
  Read(j, "fusion", fusion, "config");
  c.fusion = ParseFusionMode(fusion);
  Read(j, "checkpoint", c.checkpoint, "config");
  Read(j, "ablation_retrain", c.ablation_retrain, "config");
  Read(j, "answer_embedding_weight", c.answer_embedding_weight, "config");
  Validate(c);
  return c;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(ReadTextFile(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfiguration, path.string() + ": " + e.what());
  }
  return ConfigFromJson(j);
}

void SaveConfig(const std::filesystem::path& path, const RunConfig& config) {
  WriteTextFile(path, DumpPretty(ConfigToJson(config)));
}

}  // namespace vlqa
