#include "vlqa/ablation.h"

#include <cstdio>
#include <sstream>

#include "vlqa/errors.h"
#include "vlqa/evaluation.h"
#include "vlqa/trainer.h"

namespace vlqa {
namespace {

struct Named {
  Knockout target;
  const char* name;
};

constexpr Named kTargets[] = {
    {Knockout::kSemanticAttention, "semantic-attention"},
    {Knockout::kTaskGating, "task-gating"},
    {Knockout::kCrossAttention, "cross-attention"},
    {Knockout::kMultiScale, "multi-scale"},
    {Knockout::kSyntaxEncoding, "syntax-encoding"},
    {Knockout::kAdaptiveFusion, "adaptive-fusion"},
    {Knockout::kRefinement, "refinement"},
};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

double DeltaX(double acc_full, double acc_minus) { return (acc_full - acc_minus) / (acc_minus + kDeltaEpsilon); }

double CSem(double sim_full, double sim_minus, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kDegenerateInput, "alignment standard deviation must be positive");
  return (sim_full - sim_minus) / sigma;
}

const std::vector<Knockout>& AllKnockouts() {
  static const std::vector<Knockout> all = [] {
    std::vector<Knockout> v;
    for (const Named& n : kTargets) v.push_back(n.target);
    return v;
  }();
  return all;
}

std::string KnockoutName(Knockout target) {
  for (const Named& n : kTargets)
    if (n.target == target) return n.name;
  return "none";
}

std::string ValidKnockoutNames() {
  std::string out;
  for (const Named& n : kTargets) out += (out.empty() ? "" : ", ") + std::string(n.name);
  return out;
}

Knockout ParseKnockout(const std::string& name) {
  for (const Named& n : kTargets)
    if (name == n.name) return n.target;
  throw Error(ErrorKind::kConfiguration, "unknown knockout target '" + name + "'; valid targets: " + ValidKnockoutNames());
}

std::vector<Knockout> ParseKnockoutList(const std::string& comma_separated) {
  if (comma_separated == "all") return AllKnockouts();
  std::vector<Knockout> out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(ParseKnockout(item));
  }
  if (out.empty()) throw Error(ErrorKind::kConfiguration, "no knockout targets given; valid targets: " + ValidKnockoutNames());
  return out;
}

AblationReport RunAblation(const RunConfig& config, const AblationInputs& in, const std::vector<Knockout>& targets,
                           const ProgressFn& progress) {
  if (targets.empty()) throw Error(ErrorKind::kConfiguration, "no knockout targets given; valid targets: " + ValidKnockoutNames());
  if (config.fusion != FusionMode::kHierarchical) {
    throw Error(ErrorKind::kConfiguration, "ablation needs the hierarchical fusion mode");
  }
  const ModelSpec spec = MakeModelSpec(config, *in.manifest);
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  Model full = Model::Create(spec, config.seed);
  Trainer(full, config).Train(*in.train, {});
  const AnswerEmbeddings full_embed = AnswerEmbeddings::FromModel(full, *in.manifest);
  const EvalReport full_report = Evaluate(full, *in.test, *in.manifest, full_embed, config.gamma);
  say("full model: top1 " + Num(full_report.top1) + ", sim_sem " + Num(full_report.sim_sem_mean));

  AblationReport report;
  report.sigma_sem = full_report.sim_sem_std;
  report.retrained = config.ablation_retrain;
  report.n = full_report.n;
  for (Knockout target : targets) {
    EvalReport minus;
    if (config.ablation_retrain) {
      Model fresh = Model::Create(spec, config.seed);
      Model variant = KnockoutModel(fresh, target);
      Trainer(variant, config).Train(*in.train, {});
      minus = Evaluate(variant, *in.test, *in.manifest, AnswerEmbeddings::FromModel(variant, *in.manifest), config.gamma);
    } else {
      minus = Evaluate(KnockoutModel(full, target), *in.test, *in.manifest, full_embed, config.gamma);
    }
    AblationRow row;
    row.target = KnockoutName(target);
    row.acc_full = full_report.top1;
    row.acc_minus = minus.top1;
    row.delta_x = DeltaX(row.acc_full, row.acc_minus);
    row.sim_full = full_report.sim_sem_mean;
    row.sim_minus = minus.sim_sem_mean;
    if (report.sigma_sem > 0.0) row.c_sem = CSem(row.sim_full, row.sim_minus, report.sigma_sem);
    say(row.target + ": top1 " + Num(row.acc_minus) + ", delta " + Num(row.delta_x));
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::json AblationRowToJson(const AblationRow& row, const AblationReport& report) {
  nlohmann::json j = {{"target", row.target},       {"acc_full", row.acc_full}, {"acc_minus", row.acc_minus},
                      {"delta_x", row.delta_x},     {"sim_full", row.sim_full}, {"sim_minus", row.sim_minus},
                      {"sigma_sem", report.sigma_sem}, {"epsilon", report.epsilon}};
  if (row.c_sem) {
    j["c_sem"] = *row.c_sem;
  } else {
    j["c_sem"] = nullptr;
    j["error"] = "sigma_sem is zero; c_sem undefined";
  }
  return j;
}

nlohmann::json AblationToJson(const AblationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& r : report.rows) rows.push_back(AblationRowToJson(r, report));
  return {{"rows", rows},
          {"sigma_sem", report.sigma_sem},
          {"epsilon", report.epsilon},
          {"retrained", report.retrained},
          {"n", report.n}};
}

std::string AblationTable(const AblationReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %9s %9s %9s %9s %9s\n", "target", "acc_full", "acc_minus", "delta_x",
                "sim_minus", "c_sem");
  out << line;
  for (const AblationRow& r : report.rows) {
    std::snprintf(line, sizeof line, "%-20s %9.4f %9.4f %9.4f %9.4f %9s\n", r.target.c_str(), r.acc_full,
                  r.acc_minus, r.delta_x, r.sim_minus, r.c_sem ? Num(*r.c_sem).c_str() : "n/a");
    out << line;
  }
  return out.str();
}

}  // namespace vlqa
