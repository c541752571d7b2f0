#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vlqa/errors.h"
#include "vlqa/evaluation.h"

namespace vlqa {
namespace {

using Rankings = std::vector<std::vector<std::size_t>>;
using Golds = std::vector<std::size_t>;

TEST(MetricsTest, Top1Cases) {
  EXPECT_EQ(Top1(Rankings{{0, 1}, {1, 0}}, Golds{0, 1}), 1.0);
  EXPECT_EQ(Top1(Rankings{{0, 1}, {1, 0}}, Golds{1, 0}), 0.0);
  EXPECT_EQ(Top1(Rankings{{0}, {1}, {2}, {3}}, Golds{0, 1, 2, 0}), 0.75);
}

TEST(MetricsTest, MrrCases) {
  EXPECT_EQ(Mrr(Rankings{{2, 1, 0}}, Golds{2}), 1.0);
  EXPECT_EQ(Mrr(Rankings{{2, 1, 0}}, Golds{1}), 0.5);
  const Rankings r = {{0, 1, 2, 3}, {1, 0, 2, 3}, {3, 2, 1, 0}};
  EXPECT_NEAR(Mrr(r, Golds{0, 0, 0}), (1.0 + 0.5 + 0.25) / 3.0, 1e-15);
}

TEST(MetricsTest, ErrorsAreEvaluationErrors) {
  for (auto f : {+[] { Top1(Rankings{{0}}, Golds{0, 1}); }, +[] { Top1(Rankings{}, Golds{}); },
                 +[] { Mrr(Rankings{{0, 1}}, Golds{2}); }}) {
    try {
      f();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kEvaluation);
    }
  }
}

TEST(MetricsTest, Top1NeverExceedsMrr) {
  Rng rng(501);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Index(20), a = 2 + rng.Index(8);
    Rankings r;
    Golds g;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> perm(a);
      for (std::size_t k = 0; k < a; ++k) perm[k] = k;
      rng.Shuffle(perm);
      r.push_back(perm);
      g.push_back(rng.Index(a));
    }
    const double top1 = Top1(r, g), mrr = Mrr(r, g);
    ASSERT_LE(top1, mrr);
    ASSERT_GT(mrr, 0.0);
    ASSERT_LE(mrr, 1.0);
  }
}

TEST(SimSemTest, WorkedCases) {
  const std::vector<double> a = {1.0, 0.0}, b = {0.9, std::sqrt(1.0 - 0.81)}, c = {0.0, 2.0};
  EXPECT_NEAR(SimSem(a, b, 0.5, 1.0), 0.6, 1e-12);
  EXPECT_EQ(SimSem(a, c, 0.5, 0.0), 0.0);
  EXPECT_NEAR(SimSem(a, b, 0.0, 1.0), 0.9, 1e-12);
  try {
    SimSem(a, std::vector<double>{0.0, 0.0}, 0.5, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
  }
}

AnswerEmbeddings RandomEmbeddings(Rng& rng, std::size_t a, std::size_t d) {
  std::vector<std::size_t> cats;
  for (std::size_t i = 0; i < a; ++i) cats.push_back(i % 4);
  return AnswerEmbeddings(testing::RandomTensor({a, d}, rng), cats);
}

TEST(SimSemTest, SelfSimilarityIsOne) {
  Rng rng(502);
  const AnswerEmbeddings e = RandomEmbeddings(rng, 43, 12);
  for (double gamma : {0.0, 0.5, 2.0})
    for (std::size_t x = 0; x < e.size(); ++x) ASSERT_NEAR(e.SimSem(x, x, gamma), 1.0, 1e-12);
}

TEST(SimSemTest, SymmetricAndMonotoneInGamma) {
  Rng rng(503);
  const AnswerEmbeddings e = RandomEmbeddings(rng, 20, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = rng.Index(20), g = rng.Index(20);
    const double gamma = rng.Uniform(0.0, 3.0);
    ASSERT_EQ(e.SimSem(p, g, gamma), e.SimSem(g, p, gamma));
    if (e.TaskPenalty(p, g) == 1.0 && e.SimSem(p, g, 0.0) > 0.0) {
      ASSERT_LE(e.SimSem(p, g, gamma + 0.5), e.SimSem(p, g, gamma));
    }
  }
}

TEST(SimSemTest, PenaltyIsCategoryMismatch) {
  const AnswerEmbeddings e(Tensor::FromRows({{1, 0}, {1, 1}, {0, 1}}), {0, 0, 1});
  EXPECT_EQ(e.TaskPenalty(0, 1), 0.0);
  EXPECT_EQ(e.TaskPenalty(0, 2), 1.0);
  EXPECT_THROW(AnswerEmbeddings(Tensor::FromRows({{1, 0}, {0, 0}}), {0, 0}), Error);
}

TEST(ScoreTest, OraclePredictionsScoreOne) {
  Rng rng(504);
  const AnswerEmbeddings e = RandomEmbeddings(rng, 8, 4);
  const Rankings r = {{3, 0}, {5, 1}, {0, 2}};
  const std::vector<std::string> cats = {"x", "y", "x"};
  const EvalReport rep = Score(r, Golds{3, 5, 0}, cats, e, 0.5);
  EXPECT_EQ(rep.top1, 1.0);
  EXPECT_EQ(rep.mrr, 1.0);
  EXPECT_NEAR(rep.sim_sem_mean, 1.0, 1e-12);
  EXPECT_NEAR(rep.sim_sem_std, 0.0, 1e-12);
  EXPECT_EQ(rep.by_category.at("x").n, 2u);
  EXPECT_EQ(rep.n, 3u);
}

TEST(ScoreTest, CategoryBreakdownAndAggregates) {
  const AnswerEmbeddings e(Tensor::FromRows({{1, 0}, {0, 1}}), {0, 0});
  const Rankings r = {{0, 1}, {0, 1}, {1, 0}};
  const std::vector<std::string> cats = {"a", "a", "b"};
  const EvalReport rep = Score(r, Golds{0, 1, 1}, cats, e, 0.5);
  EXPECT_NEAR(rep.top1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rep.mrr, (1.0 + 0.5 + 1.0) / 3.0, 1e-15);
  EXPECT_NEAR(rep.by_category.at("a").sim_sem, 0.5, 1e-15);
  EXPECT_NEAR(rep.sim_sem_mean, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rep.sim_sem_category_mean, 0.75, 1e-15);
  EXPECT_NEAR(rep.sim_sem_std, std::sqrt(2.0) / 3.0, 1e-15);
  const nlohmann::json j = ReportToJson(rep);
  for (const char* key : {"top1", "mrr", "sim_sem_mean", "sim_sem_by_category", "n"}) EXPECT_TRUE(j.contains(key));
  EXPECT_NE(ReportTable(rep).find("overall"), std::string::npos);
}

TEST(EvaluateTest, DeterministicAndCandidateRestricted) {
  const testing::SmallWorld w = testing::MakeWorld(30);
  const Model model = Model::Create(w.spec, 1);
  const AnswerEmbeddings e = AnswerEmbeddings::FromModel(model, w.corpus.manifest);
  const EvalReport a = Evaluate(model, w.encoded, w.corpus.manifest, e, 0.5);
  const EvalReport b = Evaluate(model, w.encoded, w.corpus.manifest, e, 0.5);
  EXPECT_EQ(ReportToJson(a).dump(), ReportToJson(b).dump());
  EXPECT_LE(a.top1, a.mrr);
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < w.spec.num_answers; ++i) all.push_back(i);
  EXPECT_EQ(Evaluate(model, w.encoded, w.corpus.manifest, e, 0.5, all).top1, a.top1);
}

}  // namespace
}  // namespace vlqa
