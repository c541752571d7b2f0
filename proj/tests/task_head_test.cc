#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/errors.h"
#include "vlqa/grad_check.h"
#include "vlqa/ops.h"
#include "vlqa/task_head.h"

namespace vlqa {
namespace {

using testing::RandomTensor;

struct HeadInputs {
  Tensor q, v, l, w, xi;
};

HeadInputs RandomInputs(Rng& rng, std::size_t m, std::size_t n) {
  const std::size_t dv = 1 + rng.Index(4), d = 1 + rng.Index(4);
  return {RandomTensor({d}, rng), RandomTensor({m, dv}, rng), RandomTensor({n, d}, rng),
          RandomTensor({d, dv + d}, rng), RandomTensor({m, n}, rng)};
}

Tensor Attend(const HeadInputs& in) {
  Tape t;
  return SemanticAttention(t.Constant(in.q), t.Constant(in.v), t.Constant(in.l), t.Constant(in.w), t.Constant(in.xi))
      .value();
}

TEST(SemanticAttentionTest, MatchesLoopOracle) {
  Rng rng(401);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.Index(5), n = 1 + rng.Index(5);
    const HeadInputs in = RandomInputs(rng, m, n);
    const std::size_t dv = in.v.dim(1), d = in.l.dim(1);
    std::vector<double> e(m * n);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = in.xi.at(i, j);
        for (std::size_t r = 0; r < d; ++r) {
          double wx = 0.0;
          for (std::size_t c = 0; c < dv; ++c) wx += in.w.at(r, c) * in.v.at(i, c);
          for (std::size_t c = 0; c < d; ++c) wx += in.w.at(r, dv + c) * in.l.at(j, c);
          s += in.q[r] * wx;
        }
        total += e[i * n + j] = std::exp(s);
      }
    const Tensor a = Attend(in);
    double sum = 0.0;
    for (std::size_t k = 0; k < m * n; ++k) {
      ASSERT_NEAR(a[k], e[k] / total, 1e-12);
      sum += a[k];
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(SemanticAttentionTest, InvariantToConstantShiftOfPrior) {
  Rng rng(402);
  for (int trial = 0; trial < 100; ++trial) {
    HeadInputs in = RandomInputs(rng, 1 + rng.Index(4), 1 + rng.Index(4));
    const Tensor before = Attend(in);
    const double shift = rng.Uniform(-20.0, 20.0);
    for (double& x : in.xi.mutable_data()) x += shift;
    ASSERT_LT(MaxAbsDiff(before, Attend(in)), 1e-12);
  }
}

TEST(SemanticAttentionTest, DominantPriorConcentrates) {
  Rng rng(403);
  HeadInputs in = RandomInputs(rng, 3, 4);
  in.q = Tensor(in.q.shape());
  in.xi = Tensor({3, 4});
  in.xi.at(2, 1) = 50.0;
  EXPECT_GT(Attend(in).at(2, 1), 0.999);
}

TEST(SemanticAttentionTest, SinglePairIsCertain) {
  Rng rng(404);
  EXPECT_DOUBLE_EQ(Attend(RandomInputs(rng, 1, 1))[0], 1.0);
}

TEST(SemanticAttentionTest, PairPermutationPermutesWeights) {
  Rng rng(405);
  const HeadInputs in = RandomInputs(rng, 3, 2);
  HeadInputs swapped = in;
  // Swap regions 0 and 2 together with their prior rows.
  for (std::size_t c = 0; c < in.v.dim(1); ++c) std::swap(swapped.v.at(0, c), swapped.v.at(2, c));
  for (std::size_t j = 0; j < 2; ++j) std::swap(swapped.xi.at(0, j), swapped.xi.at(2, j));
  const Tensor a = Attend(in), b = Attend(swapped);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(a.at(0, j), b.at(2, j), 1e-14);
    EXPECT_NEAR(a.at(1, j), b.at(1, j), 1e-14);
  }
}

TEST(SemanticAttentionTest, ShapeErrors) {
  Tape t;
  try {
    SemanticAttention(t.Constant(Tensor({2})), t.Constant(Tensor({3, 2})), t.Constant(Tensor({2, 2})),
                      t.Constant(Tensor({2, 4})), t.Constant(Tensor({2, 3})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

struct ReadoutFixture {
  Tape tape;
  Var alpha, pairs;
  GateParams params;
};

void Build(ReadoutFixture& f, Rng& rng, std::size_t m, std::size_t n, std::size_t dz, double c_value) {
  Tensor a({m, n});
  double total = 0.0;
  for (double& x : a.mutable_data()) total += x = rng.Uniform() + 0.1;
  for (double& x : a.mutable_data()) x /= total;
  f.alpha = f.tape.Constant(a);
  f.pairs = f.tape.Constant(RandomTensor({m * n, dz}, rng));
  f.params.u_table = f.tape.Constant(RandomTensor({2, dz}, rng, 0.5));
  f.params.c_table = f.tape.Constant(Tensor::Full({2}, c_value));
  f.params.rho_gain = f.tape.Constant(Tensor::Full({dz}, 1.0));
  f.params.rho_bias = f.tape.Constant(Tensor({dz}));
}

TEST(GatedReadoutTest, MatchesLoopOracle) {
  Rng rng(406);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.Index(4), n = 1 + rng.Index(4), dz = 2 + rng.Index(4);
    ReadoutFixture f;
    Build(f, rng, m, n, dz, rng.Normal());
    const std::size_t cat = rng.Index(2);
    const GatedReadout r = GatedReadoutOp(f.alpha, f.pairs, f.params, cat);
    const Tensor& p = f.pairs.value();
    std::vector<double> pooled(dz, 0.0);
    for (std::size_t k = 0; k < m * n; ++k) {
      double z = f.params.c_table.value()[cat];
      for (std::size_t c = 0; c < dz; ++c) z += f.params.u_table.value().at(cat, c) * p.at(k, c);
      const double gate = 1.0 / (1.0 + std::exp(-z));
      ASSERT_NEAR(r.gates.value()[k], gate, 1e-12);
      ASSERT_GT(gate, 0.0);
      ASSERT_LT(gate, 1.0);
      for (std::size_t c = 0; c < dz; ++c) pooled[c] += f.alpha.value()[k] * gate * p.at(k, c);
    }
    double mean = 0.0, var = 0.0;
    for (double x : pooled) mean += x / static_cast<double>(dz);
    for (double x : pooled) var += (x - mean) * (x - mean) / static_cast<double>(dz);
    for (std::size_t c = 0; c < dz; ++c) {
      const double s = (pooled[c] - mean) / std::sqrt(var + kStandardizeEps);
      ASSERT_NEAR(r.standardized.value()[c], s, 1e-9);
      ASSERT_NEAR(r.z_final.value()[c], std::max(0.0, s), 1e-9);
    }
  }
}

TEST(GatedReadoutTest, StandardizedStageHasUnitVariance) {
  Rng rng(407);
  for (int trial = 0; trial < 100; ++trial) {
    ReadoutFixture f;
    const std::size_t dz = 3 + rng.Index(6);
    Build(f, rng, 2, 3, dz, 0.0);
    const Tensor s = GatedReadoutOp(f.alpha, f.pairs, f.params, 0).standardized.value();
    double mean = 0.0, var = 0.0;
    for (double x : s.data()) mean += x / static_cast<double>(dz);
    for (double x : s.data()) var += (x - mean) * (x - mean) / static_cast<double>(dz);
    ASSERT_NEAR(mean, 0.0, 1e-9);
    ASSERT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(GatedReadoutTest, LargeBiasSaturatesGatesOpen) {
  Rng rng(408);
  ReadoutFixture f;
  Build(f, rng, 2, 2, 4, 50.0);
  f.params.u_table = f.tape.Constant(Tensor({2, 4}));
  const GatedReadout gated = GatedReadoutOp(f.alpha, f.pairs, f.params, 1);
  const GatedReadout open = GatedReadoutOp(f.alpha, f.pairs, f.params, 1, true);
  for (double g : gated.gates.value().data()) EXPECT_GT(g, 1.0 - 1e-12);
  EXPECT_LT(MaxAbsDiff(gated.z_final.value(), open.z_final.value()), 1e-9);
  for (double g : open.gates.value().data()) EXPECT_EQ(g, 1.0);
}

TEST(GatedReadoutTest, UnknownCategoryIsCategoryError) {
  Rng rng(409);
  ReadoutFixture f;
  Build(f, rng, 1, 1, 3, 0.0);
  try {
    GatedReadoutOp(f.alpha, f.pairs, f.params, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCategory);
  }
}

TEST(GatedReadoutTest, GradientsOfGateAndNormParameters) {
  Rng rng(410);
  ParameterStore params;
  params.Add("alpha", RandomTensor({2, 3}, rng));
  params.Add("pairs", RandomTensor({6, 4}, rng));
  params.Add("u", RandomTensor({2, 4}, rng, 0.5));
  params.Add("c", RandomTensor({2}, rng));
  params.Add("gain", RandomTensor({4}, rng));
  params.Add("bias", Tensor::Vector({0.5, 0.4, 0.3, 0.2}));
  const GradCheckResult r = GradCheck(params, [](Tape& t) {
    GateParams g{t.Param("u"), t.Param("c"), t.Param("gain"), t.Param("bias")};
    Var alpha = SoftmaxAll(t.Param("alpha"));
    const GatedReadout out = GatedReadoutOp(alpha, t.Param("pairs"), g, 1);
    return SumAll(Mul(out.z_final, t.Constant(Tensor::Vector({0.3, -0.7, 1.1, 0.2}))));
  });
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(AnswerHeadTest, LogitsAreAffine) {
  Tape t;
  const Tensor l = AnswerLogits(t.Constant(Tensor::Vector({1, 2})), t.Constant(Tensor::FromRows({{1, 0}, {2, -1}})),
                                t.Constant(Tensor::Vector({0.5, 0})))
                       .value();
  EXPECT_EQ(l.values(), (std::vector<double>{1.5, 0.0}));
}

TEST(AnswerHeadTest, EqualLogitsSplitEvenlyAndTieBreakLow) {
  const AnswerDistribution d = MakeDistribution(Tensor::Vector({0.0, 0.0}));
  EXPECT_DOUBLE_EQ(d.probabilities[0], 0.5);
  EXPECT_DOUBLE_EQ(d.probabilities[1], 0.5);
  EXPECT_EQ(d.ranking.front(), 0u);
}

TEST(AnswerHeadTest, DominantLogitWins) {
  const AnswerDistribution d = MakeDistribution(Tensor::Vector({20.0, 0.0, 0.0}));
  EXPECT_GT(d.probabilities[0], 0.999);
  EXPECT_EQ(d.ranking, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(AnswerHeadTest, UniformLossIsLogOfVocabulary) {
  const AnswerDistribution d = MakeDistribution(Tensor({4}));
  EXPECT_NEAR(Loss(d, 3), std::log(4.0), 1e-15);
  Tape t;
  EXPECT_NEAR(AnswerNll(t.Constant(Tensor({4})), 1).value().item(), std::log(4.0), 1e-15);
  EXPECT_THROW(Loss(d, 4), Error);
}

TEST(AnswerHeadTest, ProbabilitiesSumToOne) {
  Rng rng(411);
  for (int trial = 0; trial < 100; ++trial) {
    const AnswerDistribution d = MakeDistribution(RandomTensor({1 + rng.Index(40)}, rng, 5.0));
    double s = 0.0;
    for (double p : d.probabilities.data()) s += p;
    ASSERT_NEAR(s, 1.0, 1e-12);
    for (std::size_t k = 1; k < d.ranking.size(); ++k)
      ASSERT_GE(d.probabilities[d.ranking[k - 1]], d.probabilities[d.ranking[k]]);
  }
}

}  // namespace
}  // namespace vlqa
