#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/errors.h"
#include "vlqa/visual_encoder.h"

namespace vlqa {
namespace {

struct Scene {
  std::vector<RegionInput> regions;
  std::vector<Tensor> weights;
  std::vector<std::size_t> widths;
  std::size_t channels = 0;
};

Scene RandomScene(Rng& rng) {
  Scene s;
  const std::size_t m = 1 + rng.Index(5), scales = 1 + rng.Index(3);
  s.channels = 1 + rng.Index(4);
  for (std::size_t k = 0; k < scales; ++k) {
    s.widths.push_back(1 + rng.Index(5));
    s.weights.push_back(testing::RandomTensor({s.channels, s.widths.back()}, rng));
  }
  for (std::size_t i = 0; i < m; ++i) {
    RegionInput r;
    r.region_id = i;
    for (std::size_t w : s.widths) {
      std::vector<double> f(w);
      for (double& x : f) x = rng.Normal();
      r.scale_features.push_back(f);
    }
    r.bbox = {0.1, 0.1, 0.4, 0.5};
    s.regions.push_back(r);
  }
  return s;
}

TEST(VisualEncoderTest, MatchesLoopOracleOnRandomScenes) {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const Scene s = RandomScene(rng);
    const SceneEncoding enc = EncodeScene(s.regions, s.weights);
    const std::size_t scales = s.widths.size();
    for (std::size_t i = 0; i < s.regions.size(); ++i)
      for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t k = 0; k < scales; ++k) {
          double expect = 0.0;
          for (std::size_t j = 0; j < s.widths[k]; ++j)
            expect += s.weights[k].at(c, j) * s.regions[i].scale_features[k][j];
          ASSERT_NEAR(enc.v[(i * s.channels + c) * scales + k], expect, 1e-12);
          ASSERT_NEAR(enc.flat.at(i, k * s.channels + c), expect, 1e-12);
        }
  }
}

TEST(VisualEncoderTest, ZeroWeightsGiveZeroEmbedding) {
  Rng rng(2);
  Scene s = RandomScene(rng);
  for (Tensor& w : s.weights) w = Tensor(w.shape());
  const SceneEncoding enc = EncodeScene(s.regions, s.weights);
  for (double x : enc.flat.data()) EXPECT_EQ(x, 0.0);
}

TEST(VisualEncoderTest, IdentityProjectionCopiesFeatures) {
  RegionInput r{0, {{1.5, -2.0, 3.0}}, {0, 0, 1, 1}};
  const std::vector<RegionInput> regions{r};
  const std::vector<Tensor> weights{Tensor::Identity(3)};
  const SceneEncoding enc = EncodeScene(regions, weights);
  EXPECT_EQ(enc.flat.values(), (std::vector<double>{1.5, -2.0, 3.0}));
}

TEST(VisualEncoderTest, WidthMismatchNamesRegionAndScale) {
  Rng rng(3);
  Scene s = RandomScene(rng);
  s.regions.back().region_id = 42;
  s.regions.back().scale_features.back().push_back(1.0);
  try {
    EncodeScene(s.regions, s.weights);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("region 42"), std::string::npos) << msg;
    EXPECT_NE(msg.find("scale " + std::to_string(s.widths.size())), std::string::npos) << msg;
  }
}

TEST(VisualEncoderTest, PoolingIsTheRegionMean) {
  RegionInput a{0, {{1.0, 2.0}}, {0, 0, 0.5, 0.5}};
  RegionInput b{1, {{3.0, 6.0}}, {0.5, 0.5, 1, 1}};
  const std::vector<RegionInput> regions{a, b};
  const std::vector<Tensor> weights{Tensor::Identity(2)};
  EXPECT_EQ(PoolVisual(EncodeScene(regions, weights)).values(), (std::vector<double>{2.0, 4.0}));
}

TEST(VisualEncoderTest, DisabledScaleContributesZeros) {
  Rng rng(4);
  const Tensor f1 = testing::RandomTensor({3, 2}, rng), f2 = testing::RandomTensor({3, 4}, rng);
  ParameterStore params;
  params.Add("w1", testing::RandomTensor({2, 2}, rng));
  params.Add("w2", testing::RandomTensor({2, 4}, rng));
  Tape tape(&params);
  const std::vector<Tensor> mats{f1, f2};
  const std::vector<Var> ws{tape.Param("w1"), tape.Param("w2")};
  const Tensor out = EncodeScene(tape, mats, ws, {true, false}).value();
  ASSERT_EQ(out.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.at(i, 2), 0.0);
    EXPECT_EQ(out.at(i, 3), 0.0);
    EXPECT_NE(out.at(i, 0), 0.0);
  }
}

}  // namespace
}  // namespace vlqa
