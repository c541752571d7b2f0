#include "vlqa/commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "vlqa/ablation.h"
#include "vlqa/checkpoint.h"
#include "vlqa/errors.h"
#include "vlqa/evaluation.h"
#include "vlqa/model.h"
#include "vlqa/synth_data.h"
#include "vlqa/trainer.h"

namespace vlqa {
namespace {

namespace fs = std::filesystem;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string DatasetDir(const CommandOptions& o, const RunConfig& c) { return o.data.value_or(c.data.dataset_dir); }

Dataset LoadDataset(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / kManifestFile)) {
    throw Error(ErrorKind::kIo, "no dataset at " + dir + " (missing " + kManifestFile + ")");
  }
  return ReadDataset(dir);
}

Checkpoint MakeCheckpoint(const RunConfig& config, const Model& model, const Trainer& trainer) {
  return {config, model.spec(), trainer.step(), model.shared_params(), trainer.state().velocity};
}

}  // namespace

RunConfig ResolveConfig(const CommandOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : LoadConfig(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.fusion) c.fusion = ParseFusionMode(*o.fusion);
  if (o.count) c.data.count = *o.count;
  if (o.noise) c.data.noise_level = *o.noise;
  if (o.epochs) c.optimizer.epochs = *o.epochs;
  if (o.split) c.data.eval_split = *o.split;
  Validate(c);
  return c;
}

std::vector<SampleRecord> SelectSplit(const std::vector<SampleRecord>& samples, std::size_t holdout,
                                      const std::string& split) {
  if (split == "all") return samples;
  if (holdout >= samples.size()) {
    throw Error(ErrorKind::kConfiguration, "holdout of " + std::to_string(holdout) + " leaves no training samples out of " +
                                               std::to_string(samples.size()));
  }
  const auto cut = samples.end() - static_cast<std::ptrdiff_t>(holdout);
  if (split == "train") return {samples.begin(), cut};
  if (split == "holdout") return {cut, samples.end()};
  throw Error(ErrorKind::kConfiguration, "unknown split '" + split + "' (expected train, holdout or all)");
}

void CmdConfig(const CommandOptions& o, std::ostream& out) {
  const RunConfig c = ResolveConfig(o);
  if (o.out) {
    SaveConfig(*o.out, c);
    out << "wrote config to " << *o.out << "\n";
  } else {
    out << DumpPretty(ConfigToJson(c));
  }
}

void CmdGen(const CommandOptions& o, std::ostream& out) {
  const RunConfig c = ResolveConfig(o);
  synth::GeneratorOptions g;
  g.seed = c.seed;
  g.count = c.data.count;
  g.noise_level = c.data.noise_level;
  g.feature_widths = c.feature_widths;
  g.channels = c.channels;
  const synth::Corpus corpus = synth::Generate(g);
  const std::string dir = o.out.value_or(c.data.dataset_dir);
  WriteDataset(dir, corpus.manifest, corpus.samples);
  std::map<std::string, std::size_t> histogram;
  for (const SampleRecord& s : corpus.samples) ++histogram[s.category];
  out << "wrote " << corpus.samples.size() << " samples to " << dir << "\n";
  for (const std::string& cat : corpus.manifest.categories) out << "  " << cat << ": " << histogram[cat] << "\n";
}

void CmdTrain(const CommandOptions& o, std::ostream& out) {
  RunConfig c = ResolveConfig(o);
  const Dataset data = LoadDataset(DatasetDir(o, c));
  const std::string ckpt_path = o.out.value_or(o.checkpoint.value_or(c.checkpoint));
  const ModelSpec spec = MakeModelSpec(c, data.manifest);
  const auto train = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "train"), data.manifest, spec);
  const auto holdout = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "holdout"), data.manifest, spec);

  Model model = Model::Create(spec, c.seed);
  TrainerState resumed;
  if (o.resume) {
    Checkpoint ck = LoadCheckpoint(o.checkpoint.value_or(ckpt_path));
    if (!(ck.spec == spec)) throw Error(ErrorKind::kConfiguration, "checkpoint model does not match the config and dataset");
    model = Model(spec, ck.params);
    resumed = {ck.step, std::move(ck.velocity)};
  }
  Trainer trainer(model, c);
  trainer.SetState(std::move(resumed));
  if (o.resume) out << "resuming at step " << trainer.step() << "\n";
  trainer.Train(train, holdout, [&](const EpochLog& log) {
    out << "epoch " << log.epoch << " step " << log.step << " loss " << Num(log.mean_loss) << " holdout_top1 "
        << (log.holdout_top1 ? Num(*log.holdout_top1) : std::string("n/a")) << "\n";
    out.flush();
    SaveCheckpoint(ckpt_path, MakeCheckpoint(c, model, trainer));
  });
  SaveCheckpoint(ckpt_path, MakeCheckpoint(c, model, trainer));
  out << "saved checkpoint " << ckpt_path << " at step " << trainer.step() << "\n";
}

void CmdEval(const CommandOptions& o, std::ostream& out) {
  const RunConfig c = ResolveConfig(o);
  const Checkpoint ck = LoadCheckpoint(o.checkpoint.value_or(c.checkpoint));
  const Dataset data = LoadDataset(DatasetDir(o, c));
  const ModelSpec expected = MakeModelSpec(ck.config, data.manifest);
  if (!(expected == ck.spec)) {
    throw Error(ErrorKind::kConfiguration, "checkpoint is incompatible with the dataset vocabularies or dimensions");
  }
  const Model model(ck.spec, ck.params);
  const auto samples = EncodeSamples(SelectSplit(data.samples, c.data.holdout, c.data.eval_split), data.manifest, ck.spec);
  const EvalReport report =
      Evaluate(model, samples, data.manifest, AnswerEmbeddings::FromModel(model, data.manifest), c.gamma);
  out << ReportTable(report);
  if (o.out) {
    WriteTextFile(*o.out, DumpPretty(ReportToJson(report)));
    out << "wrote report to " << *o.out << "\n";
  } else {
    out << DumpPretty(ReportToJson(report));
  }
}

void CmdAblate(const CommandOptions& o, std::ostream& out, std::ostream& log) {
  const RunConfig c = ResolveConfig(o);
  if (!o.targets) throw Error(ErrorKind::kConfiguration, "no knockout targets given; valid targets: " + ValidKnockoutNames());
  const std::vector<Knockout> targets = ParseKnockoutList(*o.targets);
  const Dataset data = LoadDataset(DatasetDir(o, c));
  const ModelSpec spec = MakeModelSpec(c, data.manifest);
  const auto train = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "train"), data.manifest, spec);
  const auto test = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "holdout"), data.manifest, spec);
  const AblationReport report =
      RunAblation(c, {&data.manifest, &train, &test}, targets, [&](const std::string& msg) { log << msg << "\n"; });
  const fs::path dir = o.out.value_or("ablation");
  for (const AblationRow& row : report.rows) {
    WriteTextFile(dir / (row.target + ".json"), DumpPretty(AblationRowToJson(row, report)));
  }
  WriteTextFile(dir / "ablation.json", DumpPretty(AblationToJson(report)));
  WriteTextFile(dir / "ablation.txt", AblationTable(report));
  out << AblationTable(report);
  out << "wrote " << report.rows.size() << " reports to " << dir.string() << "\n";
}

void CmdCompare(const CommandOptions& o, std::ostream& out, std::ostream& log) {
  const RunConfig base = ResolveConfig(o);
  const Dataset data = LoadDataset(DatasetDir(o, base));
  nlohmann::json rows = nlohmann::json::array();
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %10s\n", "fusion", "top1", "ci95", "mrr", "sim_sem");
  out << line;
  for (FusionMode mode : {FusionMode::kConcat, FusionMode::kScalarAttn, FusionMode::kHierarchical}) {
    RunConfig c = base;
    c.fusion = mode;
    const ModelSpec spec = MakeModelSpec(c, data.manifest);
    const auto train = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "train"), data.manifest, spec);
    const auto test = EncodeSamples(SelectSplit(data.samples, c.data.holdout, "holdout"), data.manifest, spec);
    Model model = Model::Create(spec, c.seed);
    Trainer(model, c).Train(train, {});
    const EvalReport r = Evaluate(model, test, data.manifest, AnswerEmbeddings::FromModel(model, data.manifest), c.gamma);
    const double ci = 1.96 * std::sqrt(r.top1 * (1 - r.top1) / static_cast<double>(r.n));
    log << FusionModeName(mode) << " trained\n";
    std::snprintf(line, sizeof line, "%-8s %8.4f %8.4f %8.4f %10.4f\n", FusionModeName(mode).c_str(), r.top1, ci, r.mrr,
                  r.sim_sem_mean);
    out << line;
    rows.push_back({{"fusion", FusionModeName(mode)}, {"top1", r.top1}, {"ci95", ci}, {"mrr", r.mrr},
                    {"sim_sem_mean", r.sim_sem_mean}, {"n", r.n}});
  }
  if (o.out) WriteTextFile(*o.out, DumpPretty({{"rows", rows}}));
}

}  // namespace vlqa
