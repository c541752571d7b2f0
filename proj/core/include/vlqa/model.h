#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlqa/autodiff.h"
#include "vlqa/config.h"
#include "vlqa/dataset.h"
#include "vlqa/language_encoder.h"
#include "vlqa/task_head.h"
#include "vlqa/tensor.h"

namespace vlqa {

// Sizes fixed at construction; everything a checkpoint needs to rebuild the
// parameter layout.
struct ModelSpec {
  std::vector<std::size_t> feature_widths;
  std::size_t channels = 0;
  std::size_t dim = 0;
  std::size_t answer_dim = 0;
  std::size_t vocab_size = 0;
  std::size_t num_answers = 0;
  std::size_t num_categories = 0;
  std::size_t num_classes = 0;
  std::size_t refine_rounds = 1;
  FusionMode fusion = FusionMode::kHierarchical;
  // Answer strings split into tokens; answer_tokens[a] indexes the token table.
  std::size_t num_answer_tokens = 0;
  std::vector<std::vector<std::size_t>> answer_tokens;

  std::size_t visual_dim() const { return channels * feature_widths.size(); }
  std::size_t readout_dim() const { return visual_dim() + dim; }
  bool operator==(const ModelSpec&) const = default;
};

ModelSpec MakeModelSpec(const RunConfig& config, const Manifest& manifest);
nlohmann::json ModelSpecToJson(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(const nlohmann::json& j);

// A sample with every lookup resolved, ready for repeated forward passes.
struct EncodedSample {
  std::vector<Tensor> feature_mats;  // per scale, [M x K_s]
  std::vector<BBox> boxes;
  std::vector<std::size_t> region_class;
  TreePlan plan;
  TreePlan flat_plan;
  std::size_t category = 0;
  std::size_t answer = 0;
  std::size_t answer_category = 0;
  // Flat indices into the positional and task prior tables, one per (m, n).
  std::vector<std::size_t> position_bucket;
  std::vector<std::size_t> task_bucket;
  // Flat indices into the domain prior table, one per (i, j).
  std::vector<std::size_t> prior_index;

  std::size_t num_regions() const { return boxes.size(); }
  std::size_t num_nodes() const { return plan.num_nodes; }
};

EncodedSample EncodeSample(const SampleRecord& record, const Manifest& manifest, const ModelSpec& spec);
std::vector<EncodedSample> EncodeSamples(const std::vector<SampleRecord>& records, const Manifest& manifest,
                                         const ModelSpec& spec);

// Module knockouts. Each replaces one module with a shape-preserving neutral
// substitute; hierarchical mode only.
enum class Knockout {
  kNone,
  kSemanticAttention,  // alpha uniform
  kTaskGating,         // every gate 1
  kCrossAttention,     // A uniform over nodes
  kMultiScale,         // scales past the first contribute zeros
  kSyntaxEncoding,     // every internal node is the flat mean of its leaves
  kAdaptiveFusion,     // delta fixed at 0.5
  kRefinement,         // a single attention round
};

// Intermediate values of one forward pass, kept for inspection and tests.
struct ForwardResult {
  Var logits;
  Var aux_logits;
  Var visual;           // [M x dv]
  Var nodes;            // [N x D]
  Var cross_attention;  // [M x N], hierarchical only
  Var global_score;     // [1], hierarchical only
  Var delta;            // [1], hierarchical only
  Var joint;            // [D]
  std::vector<Var> semantic_attention;  // one [M x N] map per round
  Var gates;            // last round
  Var standardized;     // last round
  Var readout;          // z_final or the baseline's normalized feature
};

class Model {
 public:
  Model(ModelSpec spec, std::shared_ptr<ParameterStore> params, Knockout knockout = Knockout::kNone);

  // Fresh parameters drawn from `seed`.
  static Model Create(const ModelSpec& spec, std::uint64_t seed);
  static void InitParams(const ModelSpec& spec, std::uint64_t seed, ParameterStore& params);

  const ModelSpec& spec() const { return spec_; }
  ParameterStore& params() { return *params_; }
  const ParameterStore& params() const { return *params_; }
  const std::shared_ptr<ParameterStore>& shared_params() const { return params_; }
  Knockout knockout() const { return knockout_; }

  ForwardResult Forward(Tape& tape, const EncodedSample& sample) const;
  // Answer NLL plus the weighted auxiliary loss that trains the answer table.
  Var Loss(Tape& tape, const EncodedSample& sample, double aux_weight) const;
  AnswerDistribution Predict(const EncodedSample& sample) const;

  // u_x per answer: mean of its token rows, [A x D_a].
  Tensor AnswerEmbeddingTable() const;

 private:
  ModelSpec spec_;
  std::shared_ptr<ParameterStore> params_;
  Knockout knockout_;
};

// Variant sharing `model`'s parameters with `target` knocked out.
Model KnockoutModel(const Model& model, Knockout target);
// The full model on the same shared parameters.
Model Restore(const Model& variant);

}  // namespace vlqa
