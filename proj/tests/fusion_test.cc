#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/errors.h"
#include "vlqa/fusion.h"
#include "vlqa/ops.h"

namespace vlqa {
namespace {

using testing::RandomTensor;

TEST(FusionTest, CrossAttentionMatchesLoopOracle) {
  Rng rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.Index(5), n = 1 + rng.Index(5), dv = 1 + rng.Index(4), d = 1 + rng.Index(4);
    const Tensor v = RandomTensor({m, dv}, rng), l = RandomTensor({n, d}, rng);
    const Tensor w = RandomTensor({dv, d}, rng), beta = RandomTensor({m, n}, rng);
    Tape tape;
    const Var a = CrossAttend(tape.Constant(v), tape.Constant(l), tape.Constant(w), tape.Constant(beta));
    const Tensor f = AttendFeatures(a, tape.Constant(l)).value();
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> score(n);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = beta.at(i, j);
        for (std::size_t p = 0; p < dv; ++p)
          for (std::size_t q = 0; q < d; ++q) s += v.at(i, p) * w.at(p, q) * l.at(j, q);
        score[j] = std::exp(s);
        total += score[j];
      }
      double row_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        ASSERT_NEAR(a.value().at(i, j), score[j] / total, 1e-12);
        row_sum += a.value().at(i, j);
      }
      ASSERT_NEAR(row_sum, 1.0, 1e-9);
      for (std::size_t q = 0; q < d; ++q) {
        double expect = 0.0;
        for (std::size_t j = 0; j < n; ++j) expect += score[j] / total * l.at(j, q);
        ASSERT_NEAR(f.at(i, q), expect, 1e-12);
      }
    }
  }
}

TEST(FusionTest, ZeroWeightsGiveUniformAttention) {
  Tape tape;
  const Tensor a = CrossAttend(tape.Constant(Tensor::Full({2, 3}, 1.0)), tape.Constant(Tensor::Full({4, 2}, 1.0)),
                               tape.Constant(Tensor({3, 2})), tape.Constant(Tensor({2, 4})))
                       .value();
  for (double x : a.data()) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(FusionTest, DominantPriorConcentratesAttention) {
  Tape tape;
  Tensor beta({1, 3});
  beta.at(0, 1) = 50.0;
  const Tensor a = CrossAttend(tape.Constant(Tensor::Full({1, 2}, 0.1)), tape.Constant(Tensor::Full({3, 2}, 0.1)),
                               tape.Constant(Tensor::Full({2, 2}, 0.1)), tape.Constant(beta))
                       .value();
  EXPECT_GT(a.at(0, 1), 0.999);
}

TEST(FusionTest, GlobalScoreMatchesLoopOracleAndIsBounded) {
  Rng rng(304);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.Index(5), n = 1 + rng.Index(5), d = 1 + rng.Index(4);
    const Tensor f = RandomTensor({m, d}, rng), g = RandomTensor({n, d}, rng);
    // A joint distribution over the pairs.
    Tensor lambda({m, n});
    double total = 0.0;
    for (double& x : lambda.mutable_data()) total += x = rng.Uniform();
    for (double& x : lambda.mutable_data()) x /= total;
    double num = 0.0, fs = 0.0, gs = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += f.at(i, k) * g.at(j, k);
        num += lambda.at(i, j) * dot;
      }
    for (double x : f.data()) fs += x * x;
    for (double x : g.data()) gs += x * x;
    const double score = GlobalScore(f, g, lambda);
    ASSERT_NEAR(score, num / (std::sqrt(fs) * std::sqrt(gs)), 1e-12);
    ASSERT_LE(std::abs(score), 1.0 + 1e-9);
  }
}

TEST(FusionTest, GlobalScoreOfAlignedPairIsOne) {
  const Tensor f = Tensor::FromRows({{3.0, 4.0}});
  EXPECT_NEAR(GlobalScore(f, f, Tensor::FromRows({{1.0}})), 1.0, 1e-15);
  EXPECT_THROW(GlobalScore(Tensor({1, 2}), f, Tensor::FromRows({{1.0}})), Error);
}

TEST(FusionTest, AdaptiveCoefficientIsAStrictProbability) {
  Rng rng(305);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.Index(6);
    Tape tape;
    auto c = [&] { return tape.Constant(RandomTensor({d}, rng, 2.0)); };
    const Var v = c(), l = c(), s = c(), mv = c(), ml = c(), mt = c();
    const double delta = AdaptiveCoeff(v, l, s, mv, ml, mt).value().item();
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      z += mv.value()[k] * v.value()[k] + ml.value()[k] * l.value()[k] + mt.value()[k] * s.value()[k];
    ASSERT_NEAR(delta, 1.0 / (1.0 + std::exp(-z)), 1e-12);
    ASSERT_GT(delta, 0.0);
    ASSERT_LT(delta, 1.0);
  }
  Tape tape;
  const Var zero = tape.Constant(Tensor({3}));
  EXPECT_DOUBLE_EQ(AdaptiveCoeff(zero, zero, zero, zero, zero, zero).value().item(), 0.5);
}

TEST(FusionTest, ConcatPlacesVisualFirst) {
  EXPECT_EQ(FuseConcat(Tensor::Vector({1, 2}), Tensor::Vector({3})).values(), (std::vector<double>{1, 2, 3}));
  try {
    FuseConcat(Tensor({0}), Tensor::Vector({3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(FusionTest, ScalarAttentionBlendsPerRow) {
  Rng rng(306);
  Tape tape;
  const Tensor v = RandomTensor({3, 2}, rng), l = RandomTensor({2}, rng);
  const Tensor w = RandomTensor({4}, rng), b = Tensor::Vector({0.3});
  const ScalarFusion out = FuseScalarAttn(tape.Constant(v), tape.Constant(l), tape.Constant(w), tape.Constant(b));
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = w[0] * v.at(i, 0) + w[1] * v.at(i, 1) + w[2] * l[0] + w[3] * l[1] + 0.3;
    const double a = 1.0 / (1.0 + std::exp(-z));
    EXPECT_NEAR(out.alpha.value()[i], a, 1e-14);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(out.fused.value().at(i, k), a * v.at(i, k) + (1 - a) * l[k], 1e-14);
  }
}

TEST(FusionTest, ScalarAttentionSaturates) {
  Tape tape;
  const Tensor v = Tensor::Vector({1, 2}), l = Tensor::Vector({5, 7});
  const auto high = FuseScalarAttn(tape.Constant(v), tape.Constant(l), tape.Constant(Tensor({4})),
                                   tape.Constant(Tensor::Vector({60.0})));
  EXPECT_NEAR(MaxAbsDiff(high.fused.value(), v), 0.0, 1e-12);
  const auto low = FuseScalarAttn(tape.Constant(v), tape.Constant(l), tape.Constant(Tensor({4})),
                                  tape.Constant(Tensor::Vector({-60.0})));
  EXPECT_NEAR(MaxAbsDiff(low.fused.value(), l), 0.0, 1e-12);
}

TEST(FusionTest, PositionBuckets) {
  EXPECT_EQ(DistanceBin({0.45, 0.45, 0.55, 0.55}), 0u);
  EXPECT_EQ(DistanceBin({0.0, 0.0, 0.02, 0.02}), kDistanceBins - 1);
  EXPECT_EQ(CappedDepth(9), kMaxPriorDepth);
  EXPECT_EQ(PositionBucket({0.45, 0.45, 0.55, 0.55}, 2), 2u);
  EXPECT_LT(PositionBucket({0.0, 0.0, 0.02, 0.02}, 7), kPositionBuckets);
}

}  // namespace
}  // namespace vlqa
