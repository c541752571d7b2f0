#include "vlqa/model.h"

#include <cmath>

#include "vlqa/errors.h"
#include "vlqa/fusion.h"
#include "vlqa/ops.h"
#include "vlqa/rng.h"
#include "vlqa/visual_encoder.h"

namespace vlqa {
namespace {

constexpr const char* kWa = "fusion/W_a";
constexpr const char* kBPos = "fusion/b_pos";
constexpr const char* kBTask = "fusion/b_task";
constexpr const char* kMuV = "fusion/mu_v";
constexpr const char* kMuL = "fusion/mu_l";
constexpr const char* kMuT = "fusion/mu_t";
constexpr const char* kProjW = "fusion/vis_proj_W";
constexpr const char* kProjB = "fusion/vis_proj_b";
constexpr const char* kCtxW = "fusion/ctx_w";
constexpr const char* kCtxB = "fusion/ctx_b";
constexpr const char* kWs = "head/W_s";
constexpr const char* kXi = "head/xi";
constexpr const char* kGateU = "head/gate_u";
constexpr const char* kGateC = "head/gate_c";
constexpr const char* kRhoGain = "head/rho_gain";
constexpr const char* kRhoBias = "head/rho_bias";
constexpr const char* kRefineW = "head/refine_W";
constexpr const char* kOutW = "head/out_W";
constexpr const char* kOutB = "head/out_b";
constexpr const char* kAnswerTokens = "answer_embed/tokens";
constexpr const char* kAnswerProj = "answer_embed/proj";

Tensor UniformTensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.mutable_data()) x = rng.Uniform(-bound, bound);
  return t;
}

Tensor Glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  return UniformTensor({rows, cols}, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

// [A x T] matrix whose row a averages the token rows of answer a.
Tensor AnswerAveraging(const ModelSpec& spec) {
  Tensor avg({spec.num_answers, spec.num_answer_tokens});
  for (std::size_t a = 0; a < spec.num_answers; ++a) {
    const auto& toks = spec.answer_tokens.at(a);
    for (std::size_t t : toks) avg.at(a, t) += 1.0 / static_cast<double>(toks.size());
  }
  return avg;
}

Var Rho(Var x, Var gain, Var bias) {
  return Relu(Add(Mul(Standardize(x, kStandardizeEps), gain), bias));
}

Var ProjectRegions(Tape& t, Var v) {
  return AddRowVector(MatMul(v, Transpose(t.Param(kProjW))), t.Param(kProjB));
}

}  // namespace

ModelSpec MakeModelSpec(const RunConfig& config, const Manifest& manifest) {
  if (config.feature_widths != manifest.feature_widths) {
    throw Error(ErrorKind::kConfiguration, "config feature widths do not match the dataset manifest");
  }
  if (config.channels != manifest.channels) {
    throw Error(ErrorKind::kConfiguration, "config channels C=" + std::to_string(config.channels) +
                                               " but the dataset manifest has C=" + std::to_string(manifest.channels));
  }
  ModelSpec spec;
  spec.feature_widths = config.feature_widths;
  spec.channels = config.channels;
  spec.dim = config.dim;
  spec.answer_dim = config.answer_dim;
  spec.vocab_size = manifest.vocab.size();
  spec.num_answers = manifest.answer_vocab.size();
  spec.num_categories = manifest.categories.size();
  spec.num_classes = manifest.classes.size();
  spec.refine_rounds = config.refine_rounds;
  spec.fusion = config.fusion;
  const Manifest::AnswerTokens split = manifest.SplitAnswerTokens();
  spec.num_answer_tokens = split.tokens.size();
  spec.answer_tokens = split.answer_tokens;
  return spec;
}

nlohmann::json ModelSpecToJson(const ModelSpec& s) {
  return {{"feature_widths", s.feature_widths}, {"channels", s.channels},
          {"dim", s.dim},                       {"answer_dim", s.answer_dim},
          {"vocab_size", s.vocab_size},         {"num_answers", s.num_answers},
          {"num_categories", s.num_categories}, {"num_classes", s.num_classes},
          {"refine_rounds", s.refine_rounds},   {"fusion", FusionModeName(s.fusion)},
          {"num_answer_tokens", s.num_answer_tokens}, {"answer_tokens", s.answer_tokens}};
}

ModelSpec ModelSpecFromJson(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.feature_widths = j.at("feature_widths").get<std::vector<std::size_t>>();
    s.channels = j.at("channels").get<std::size_t>();
    s.dim = j.at("dim").get<std::size_t>();
    s.answer_dim = j.at("answer_dim").get<std::size_t>();
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.num_answers = j.at("num_answers").get<std::size_t>();
    s.num_categories = j.at("num_categories").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.refine_rounds = j.at("refine_rounds").get<std::size_t>();
    s.fusion = ParseFusionMode(j.at("fusion").get<std::string>());
    s.num_answer_tokens = j.at("num_answer_tokens").get<std::size_t>();
    s.answer_tokens = j.at("answer_tokens").get<std::vector<std::vector<std::size_t>>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("model spec: ") + e.what());
  }
}

EncodedSample EncodeSample(const SampleRecord& record, const Manifest& manifest, const ModelSpec& spec) {
  if (record.regions.empty()) throw Error(ErrorKind::kDimension, "sample has no regions");
  std::vector<RegionInput> regions;
  EncodedSample s;
  for (std::size_t i = 0; i < record.regions.size(); ++i) {
    const RegionRecord& r = record.regions[i];
    regions.push_back({i, r.features, r.bbox});
    s.boxes.push_back(r.bbox);
    s.region_class.push_back(manifest.ClassId(r.cls));
  }
  ValidateRegions(regions, spec.feature_widths);
  s.feature_mats = ScaleFeatureMatrices(regions, spec.feature_widths);
  s.plan = PlanTree(record.tree);
  s.flat_plan = FlattenPlan(s.plan);
  s.category = manifest.CategoryId(record.category);
  s.answer = record.answer;
  s.answer_category = manifest.AnswerCategoryId(record.answer);

  const std::size_t m = s.num_regions(), n = s.num_nodes();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s.position_bucket.push_back(PositionBucket(s.boxes[i], s.plan.depth[j]));
      s.task_bucket.push_back(s.category * kDepthLevels + CappedDepth(s.plan.depth[j]));
      s.prior_index.push_back(s.region_class[i] * spec.num_categories + s.category);
    }
  }
  return s;
}

std::vector<EncodedSample> EncodeSamples(const std::vector<SampleRecord>& records, const Manifest& manifest,
                                         const ModelSpec& spec) {
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (const SampleRecord& r : records) out.push_back(EncodeSample(r, manifest, spec));
  return out;
}

Model::Model(ModelSpec spec, std::shared_ptr<ParameterStore> params, Knockout knockout)
    : spec_(std::move(spec)), params_(std::move(params)), knockout_(knockout) {
  if (!params_) throw Error(ErrorKind::kPrecondition, "model needs a parameter store");
  if (knockout_ != Knockout::kNone && spec_.fusion != FusionMode::kHierarchical) {
    throw Error(ErrorKind::kConfiguration, "module knockouts need the hierarchical fusion mode");
  }
}

void Model::InitParams(const ModelSpec& spec, std::uint64_t seed, ParameterStore& p) {
  Rng rng(MixSeed(seed, 0x6d6f64656cULL));
  const std::size_t dv = spec.visual_dim(), d = spec.dim, dz = spec.readout_dim();
  const std::size_t feat = dz + d, cats = spec.num_categories;
  InitVisualParams(p, spec.feature_widths, spec.channels, rng);
  InitLanguageParams(p, spec.vocab_size, d, rng);
  if (spec.fusion != FusionMode::kConcat) {
    p.Add(kProjW, Glorot(d, dv, rng));
    p.Add(kProjB, Tensor({d}));
  }
  if (spec.fusion == FusionMode::kScalarAttn) {
    p.Add(kCtxW, UniformTensor({2 * d}, std::sqrt(3.0 / static_cast<double>(2 * d)), rng));
    p.Add(kCtxB, Tensor({1}));
  }
  if (spec.fusion == FusionMode::kHierarchical) {
    p.Add(kWa, Glorot(dv, d, rng));
    p.Add(kBPos, Tensor({kPositionBuckets}));
    p.Add(kBTask, Tensor({cats * kDepthLevels}));
    p.Add(kMuV, UniformTensor({dv}, 0.1, rng));
    p.Add(kMuL, UniformTensor({d}, 0.1, rng));
    p.Add(kMuT, UniformTensor({d}, 0.1, rng));
    p.Add(kWs, Glorot(d, dz, rng));
    p.Add(kXi, Tensor({spec.num_classes, cats}));
    p.Add(kGateU, UniformTensor({cats, dz}, 0.1, rng));
    p.Add(kGateC, Tensor({cats}));
    p.Add(kRefineW, UniformTensor({d, dz}, 0.1, rng));
  }
  p.Add(kRhoGain, Tensor::Full({dz}, 1.0));
  p.Add(kRhoBias, Tensor({dz}));
  p.Add(kOutW, Glorot(spec.num_answers, feat, rng));
  p.Add(kOutB, Tensor({spec.num_answers}));
  Tensor answer_tokens({spec.num_answer_tokens, spec.answer_dim});
  for (double& x : answer_tokens.mutable_data()) x = rng.Normal();
  p.Add(kAnswerTokens, std::move(answer_tokens));
  p.Add(kAnswerProj, Glorot(spec.answer_dim, feat, rng));
}

Model Model::Create(const ModelSpec& spec, std::uint64_t seed) {
  auto params = std::make_shared<ParameterStore>();
  InitParams(spec, seed, *params);
  return Model(spec, std::move(params));
}

ForwardResult Model::Forward(Tape& t, const EncodedSample& s) const {
  ForwardResult r;
  const std::size_t m = s.num_regions(), n = s.num_nodes();
  const std::size_t d = spec_.dim, dz = spec_.readout_dim();

  std::vector<Var> weights;
  std::vector<bool> enabled;
  for (std::size_t k = 0; k < spec_.feature_widths.size(); ++k) {
    weights.push_back(t.Param(VisualWeightName(k)));
    enabled.push_back(knockout_ != Knockout::kMultiScale || k == 0);
  }
  r.visual = EncodeScene(t, s.feature_mats, weights, enabled);
  const TreePlan& plan = knockout_ == Knockout::kSyntaxEncoding ? s.flat_plan : s.plan;
  r.nodes = EncodeTree(t, plan, {t.Param(kTokenTableName), t.Param(kTauWeightName), t.Param(kTauBiasName)});
  const Var q = QuestionIntent(r.nodes, plan);
  const Var vbar = MeanRows(r.visual);
  const Var gain = t.Param(kRhoGain), bias = t.Param(kRhoBias);

  Var features;
  if (spec_.fusion == FusionMode::kConcat) {
    r.joint = q;
    r.readout = Rho(FuseConcat(vbar, q), gain, bias);
    features = Concat({r.readout, q}, 0);
  } else if (spec_.fusion == FusionMode::kScalarAttn) {
    const ScalarFusion fused = FuseScalarAttn(ProjectRegions(t, r.visual), q, t.Param(kCtxW), t.Param(kCtxB));
    r.joint = MeanRows(fused.fused);
    r.readout = Rho(Concat({vbar, r.joint}, 0), gain, bias);
    features = Concat({r.readout, r.joint}, 0);
  } else {
    if (knockout_ == Knockout::kCrossAttention) {
      r.cross_attention = t.Constant(Tensor::Full({m, n}, 1.0 / static_cast<double>(n)));
    } else {
      const Var beta =
          Reshape(Add(GatherFlat(t.Param(kBPos), s.position_bucket), GatherFlat(t.Param(kBTask), s.task_bucket)),
                  {m, n});
      r.cross_attention = CrossAttend(r.visual, r.nodes, t.Param(kWa), beta);
    }
    const Var f = AttendFeatures(r.cross_attention, r.nodes);
    // lambda = A / M: a joint distribution over pairs keeps |score| <= 1.
    r.global_score = GlobalScore(f, r.nodes, Scale(r.cross_attention, 1.0 / static_cast<double>(m)));
    if (knockout_ == Knockout::kAdaptiveFusion) {
      r.delta = t.Constant(Tensor::Scalar(0.5));
    } else {
      r.delta = AdaptiveCoeff(vbar, MeanRows(r.nodes), MeanRows(f), t.Param(kMuV), t.Param(kMuL), t.Param(kMuT));
    }
    const Var stream = MeanRows(Add(f, ProjectRegions(t, r.visual)));
    r.joint = Add(ScaleBy(r.delta, stream), ScaleBy(AddScalar(Scale(r.delta, -1.0), 1.0), q));

    const Var pairs = PairConcat(r.visual, r.nodes);
    const Var xi = Reshape(GatherFlat(t.Param(kXi), s.prior_index), {m, n});
    const GateParams gate{t.Param(kGateU), t.Param(kGateC), gain, bias};
    const std::size_t rounds = knockout_ == Knockout::kRefinement ? 1 : spec_.refine_rounds;
    Var intent = q;
    for (std::size_t round = 0; round < rounds; ++round) {
      const Var alpha = knockout_ == Knockout::kSemanticAttention
                            ? t.Constant(Tensor::Full({m, n}, 1.0 / static_cast<double>(m * n)))
                            : SemanticAttention(intent, pairs, m, n, t.Param(kWs), xi);
      const GatedReadout out = GatedReadoutOp(alpha, pairs, gate, s.category, knockout_ == Knockout::kTaskGating);
      r.semantic_attention.push_back(alpha);
      r.gates = out.gates;
      r.standardized = out.standardized;
      r.readout = out.z_final;
      if (round + 1 < rounds) {
        intent = Add(intent, Reshape(MatMul(t.Param(kRefineW), Reshape(out.z_final, {dz, 1})), {d}));
      }
    }
    features = Concat({r.readout, r.joint}, 0);
  }
  r.logits = AnswerLogits(features, t.Param(kOutW), t.Param(kOutB));

  const Var table = MatMul(t.Constant(AnswerAveraging(spec_)), t.Param(kAnswerTokens));
  const Var projected = MatMul(t.Param(kAnswerProj), Reshape(features, {features.value().size(), 1}));
  r.aux_logits = Reshape(MatMul(table, projected), {spec_.num_answers});
  return r;
}

Var Model::Loss(Tape& tape, const EncodedSample& sample, double aux_weight) const {
  const ForwardResult r = Forward(tape, sample);
  Var loss = AnswerNll(r.logits, sample.answer);
  if (aux_weight > 0) loss = Add(loss, Scale(AnswerNll(r.aux_logits, sample.answer), aux_weight));
  return loss;
}

AnswerDistribution Model::Predict(const EncodedSample& sample) const {
  Tape tape(params_.get());
  return MakeDistribution(Forward(tape, sample).logits.value());
}

Tensor Model::AnswerEmbeddingTable() const {
  return MatMul(AnswerAveraging(spec_), params_->Value(kAnswerTokens));
}

Model KnockoutModel(const Model& model, Knockout target) {
  return Model(model.spec(), model.shared_params(), target);
}

Model Restore(const Model& variant) { return Model(variant.spec(), variant.shared_params(), Knockout::kNone); }

}  // namespace vlqa
