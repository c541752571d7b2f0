#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/ablation.h"
#include "vlqa/commands.h"
#include "vlqa/errors.h"
#include "vlqa/evaluation.h"

namespace vlqa {
namespace {

namespace fs = std::filesystem;

class CommandsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("vlqa_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    RunConfig c;
    c.data.count = 40;
    c.data.holdout = 10;
    c.data.noise_level = 0.2;
    c.optimizer.epochs = 1;
    c.data.dataset_dir = (root_ / "data").string();
    c.checkpoint = (root_ / "model.ckpt").string();
    SaveConfig(root_ / "config.json", c);
  }

  CommandOptions Opts() const {
    CommandOptions o;
    o.config_path = (root_ / "config.json").string();
    return o;
  }

  std::string Read(const fs::path& p) const { return ReadTextFile(p); }

  fs::path root_;
};

TEST_F(CommandsTest, GenWritesOneLinePerSample) {
  CommandOptions o = Opts();
  o.count = 100;
  std::ostringstream out;
  CmdGen(o, out);
  const std::string lines = Read(root_ / "data" / kSamplesFile);
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 100);
  EXPECT_NE(out.str().find("wrote 100 samples"), std::string::npos);
  const Dataset d = ReadDataset(root_ / "data");
  std::set<std::string> cats;
  for (const SampleRecord& s : d.samples) cats.insert(s.category);
  EXPECT_EQ(cats.size(), 4u);
}

TEST_F(CommandsTest, GenWithZeroCountIsPreconditionError) {
  CommandOptions o = Opts();
  o.count = 0;
  std::ostringstream out;
  try {
    CmdGen(o, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST_F(CommandsTest, PipelineIsByteReproducible) {
  std::ostringstream sink;
  std::vector<std::string> runs;
  for (int rep = 0; rep < 2; ++rep) {
    CommandOptions o = Opts();
    CmdGen(o, sink);
    const std::string data = Read(root_ / "data" / kSamplesFile) + Read(root_ / "data" / kManifestFile);
    std::ostringstream train_log;
    CmdTrain(o, train_log);
    const std::string ckpt = Read(root_ / "model.ckpt");
    o.out = (root_ / "eval.json").string();
    CmdEval(o, sink);
    const std::string eval = Read(root_ / "eval.json");
    o.out = (root_ / "abl").string();
    o.targets = "semantic-attention";
    CmdAblate(o, sink, sink);
    const std::string abl = Read(root_ / "abl" / "ablation.json");
    runs.push_back(data + "\x1f" + train_log.str() + "\x1f" + ckpt + "\x1f" + eval + "\x1f" + abl);
    fs::remove_all(root_ / "data");
    fs::remove(root_ / "model.ckpt");
  }
  EXPECT_EQ(runs[0], runs[1]);
}

// A shorter run is a prefix of a longer one only when the step size does not
// depend on the run length.
TEST_F(CommandsTest, ResumeContinuesFromCheckpoint) {
  RunConfig c = LoadConfig(root_ / "config.json");
  c.optimizer.schedule = "constant";
  SaveConfig(root_ / "config.json", c);
  std::ostringstream sink;
  CommandOptions o = Opts();
  CmdGen(o, sink);
  o.epochs = 2;
  CmdTrain(o, sink);
  const std::string straight = Read(root_ / "model.ckpt");
  o.epochs = 1;
  CmdTrain(o, sink);
  o.epochs = 2;
  o.resume = true;
  std::ostringstream log;
  CmdTrain(o, log);
  EXPECT_NE(log.str().find("resuming at step"), std::string::npos);
  EXPECT_TRUE(Read(root_ / "model.ckpt") == straight);
}

TEST_F(CommandsTest, EvalNeedsACheckpoint) {
  std::ostringstream sink;
  CommandOptions o = Opts();
  CmdGen(o, sink);
  try {
    CmdEval(o, sink);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST_F(CommandsTest, AblateTargets) {
  std::ostringstream sink;
  CommandOptions o = Opts();
  CmdGen(o, sink);
  o.out = (root_ / "abl").string();
  try {
    CmdAblate(o, sink, sink);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfiguration);
  }
  o.targets = "bogus";
  EXPECT_THROW(CmdAblate(o, sink, sink), Error);

  o.targets = "cross-attention";
  CmdAblate(o, sink, sink);
  EXPECT_EQ(ReadJsonFile(root_ / "abl" / "ablation.json")["rows"].size(), 1u);
  EXPECT_TRUE(fs::exists(root_ / "abl" / "cross-attention.json"));

  o.targets = "all";
  o.epochs = 1;
  CmdAblate(o, sink, sink);
  const nlohmann::json rows = ReadJsonFile(root_ / "abl" / "ablation.json")["rows"];
  ASSERT_EQ(rows.size(), 7u);
  for (const nlohmann::json& r : rows) {
    EXPECT_TRUE(std::isfinite(r["delta_x"].get<double>()));
    if (!r["c_sem"].is_null()) {
      EXPECT_TRUE(std::isfinite(r["c_sem"].get<double>()));
    }
  }
}

TEST_F(CommandsTest, SplitSelection) {
  const synth::Corpus c = synth::Generate({});
  EXPECT_EQ(SelectSplit(c.samples, 30, "train").size(), 70u);
  EXPECT_EQ(SelectSplit(c.samples, 30, "holdout").size(), 30u);
  EXPECT_EQ(SelectSplit(c.samples, 30, "all").size(), 100u);
  EXPECT_THROW(SelectSplit(c.samples, 30, "dev"), Error);
  EXPECT_THROW(SelectSplit(c.samples, 100, "train"), Error);
}

// An untrained model restricted to the four reading buckets should sit at
// chance, up to a binomial 99% interval.
TEST(UntrainedModelTest, FourWayFamilyScoresAtChance) {
  testing::SmallWorld w = testing::MakeWorld(3000, 21);
  std::vector<EncodedSample> family;
  for (std::size_t i = 0; i < w.corpus.samples.size(); ++i)
    if (w.corpus.samples[i].template_id == "gauge-range") family.push_back(w.encoded[i]);
  std::vector<std::size_t> candidates;
  for (const std::string& b : synth::Buckets()) candidates.push_back(w.corpus.manifest.AnswerId(b));
  const Model model = Model::Create(w.spec, 3);
  const EvalReport r = Evaluate(model, family, w.corpus.manifest, AnswerEmbeddings::FromModel(model, w.corpus.manifest),
                                0.5, candidates);
  const double n = static_cast<double>(r.n);
  ASSERT_GT(n, 100.0);
  EXPECT_NEAR(r.top1, 0.25, 2.576 * std::sqrt(0.25 * 0.75 / n));
}

TEST(UntrainedModelTest, OracleRankingsScorePerfectly) {
  const testing::SmallWorld w = testing::MakeWorld(50);
  const Model model = Model::Create(w.spec, 3);
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::size_t> golds;
  std::vector<std::string> cats;
  for (const SampleRecord& s : w.corpus.samples) {
    rankings.push_back({s.answer});
    golds.push_back(s.answer);
    cats.push_back(s.category);
  }
  const EvalReport r = Score(rankings, golds, cats, AnswerEmbeddings::FromModel(model, w.corpus.manifest), 0.5);
  EXPECT_EQ(r.top1, 1.0);
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_NEAR(r.sim_sem_mean, 1.0, 1e-12);
}

}  // namespace
}  // namespace vlqa
