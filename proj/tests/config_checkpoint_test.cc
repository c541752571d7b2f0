#include <filesystem>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/checkpoint.h"
#include "vlqa/config.h"
#include "vlqa/errors.h"

namespace vlqa {
namespace {

std::filesystem::path TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vlqa_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(ConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.fusion = FusionMode::kScalarAttn;
  c.optimizer.learning_rate = 0.003;
  c.data.noise_level = 0.25;
  c.ablation_retrain = false;
  EXPECT_EQ(ConfigFromJson(ConfigToJson(c)), c);
  const auto path = TempDir("config") / "run.json";
  SaveConfig(path, c);
  EXPECT_EQ(LoadConfig(path), c);
}

TEST(ConfigTest, UnknownKeyIsRejected) {
  nlohmann::json j = ConfigToJson(RunConfig{});
  j["optimizer"]["learning_rat"] = 0.1;
  try {
    ConfigFromJson(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfiguration);
    EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
  }
}

TEST(ConfigTest, ValidationErrors) {
  auto expect_config_error = [](RunConfig c) {
    try {
      Validate(c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfiguration);
      EXPECT_EQ(e.exit_code(), 2);
    }
  };
  RunConfig c;
  Validate(c);
  c.dim = 0;
  expect_config_error(c);
  c = RunConfig{};
  c.optimizer.momentum = 1.0;
  expect_config_error(c);
  c = RunConfig{};
  c.data.holdout = c.data.count;
  expect_config_error(c);
  c = RunConfig{};
  c.data.eval_split = "validation";
  expect_config_error(c);
  EXPECT_THROW(ParseFusionMode("sum"), Error);
  for (FusionMode m : {FusionMode::kConcat, FusionMode::kScalarAttn, FusionMode::kHierarchical})
    EXPECT_EQ(ParseFusionMode(FusionModeName(m)), m);
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const testing::SmallWorld w = testing::MakeWorld(5);
  Checkpoint ck;
  ck.config = w.config;
  ck.spec = w.spec;
  ck.step = 17;
  ck.params = Model::Create(w.spec, 3).shared_params();
  ck.velocity["head/out_b"] = Tensor::Vector({0.1, -1e-300, 3.0});
  const std::string bytes = SerializeCheckpoint(ck);
  const Checkpoint back = DeserializeCheckpoint(bytes);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.spec, ck.spec);
  EXPECT_EQ(back.step, 17u);
  EXPECT_TRUE(back.params->SameValues(*ck.params));
  EXPECT_EQ(back.velocity, ck.velocity);
  EXPECT_EQ(SerializeCheckpoint(back), bytes);

  const auto path = TempDir("ckpt") / "model.ckpt";
  SaveCheckpoint(path, ck);
  EXPECT_EQ(SerializeCheckpoint(LoadCheckpoint(path)), bytes);
}

TEST(CheckpointTest, VersionMismatchNamesBothVersions) {
  const testing::SmallWorld w = testing::MakeWorld(3);
  Checkpoint ck{w.config, w.spec, 0, Model::Create(w.spec, 1).shared_params(), {}};
  std::string bytes = SerializeCheckpoint(ck);
  bytes[8] = 7;
  try {
    DeserializeCheckpoint(bytes);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('7'), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(kCheckpointVersion)), std::string::npos) << msg;
  }
}

TEST(CheckpointTest, CorruptInputIsRejected) {
  EXPECT_THROW(DeserializeCheckpoint("not a checkpoint"), Error);
  const testing::SmallWorld w = testing::MakeWorld(3);
  const std::string bytes = SerializeCheckpoint({w.config, w.spec, 0, Model::Create(w.spec, 1).shared_params(), {}});
  EXPECT_THROW(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 3)), Error);
  try {
    LoadCheckpoint("/nonexistent/dir/x.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace vlqa
