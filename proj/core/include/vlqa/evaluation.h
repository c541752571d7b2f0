#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlqa/dataset.h"
#include "vlqa/model.h"
#include "vlqa/tensor.h"

namespace vlqa {

// Fraction of rankings whose first entry equals the gold answer.
double Top1(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds);
// Mean of 1/rank(gold), ranks 1-based. Evaluation error when gold is absent.
double Mrr(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds);
std::size_t RankOf(const std::vector<std::size_t>& ranking, std::size_t gold);

// (u_p . u_g) / (|u_p| |u_g| + gamma * penalty). Degenerate-input error for a
// zero-norm embedding.
double SimSem(std::span<const double> u_p, std::span<const double> u_g, double gamma, double penalty);

// Frozen answer embedding table with the task category of every answer.
class AnswerEmbeddings {
 public:
  AnswerEmbeddings(Tensor table, std::vector<std::size_t> categories);
  static AnswerEmbeddings FromModel(const Model& model, const Manifest& manifest);

  std::size_t size() const { return table_.dim(0); }
  std::span<const double> Row(std::size_t answer) const;
  // 1 iff the two answers belong to different task categories.
  double TaskPenalty(std::size_t a, std::size_t b) const;
  double SimSem(std::size_t pred, std::size_t gold, double gamma) const;
  const Tensor& table() const { return table_; }

 private:
  Tensor table_;
  std::vector<std::size_t> categories_;
};

struct CategoryReport {
  std::size_t n = 0;
  double top1 = 0.0;
  double mrr = 0.0;
  double sim_sem = 0.0;
};

struct EvalReport {
  double top1 = 0.0;
  double mrr = 0.0;
  double sim_sem_mean = 0.0;
  // Unweighted mean of the per-category means.
  double sim_sem_category_mean = 0.0;
  double sim_sem_std = 0.0;  // population std of the per-sample scores
  std::size_t n = 0;
  std::map<std::string, CategoryReport> by_category;
  std::vector<double> per_sample_sim;
  std::vector<std::size_t> predictions;
};

// Scores precomputed rankings. `categories[i]` names sample i's question category.
EvalReport Score(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds,
                 std::span<const std::string> categories, const AnswerEmbeddings& embeddings, double gamma);

// Runs the model on every sample. With `candidates`, rankings are restricted
// to that answer subset (its gold answers must be in it).
EvalReport Evaluate(const Model& model, const std::vector<EncodedSample>& samples, const Manifest& manifest,
                    const AnswerEmbeddings& embeddings, double gamma,
                    const std::optional<std::vector<std::size_t>>& candidates = std::nullopt);

nlohmann::json ReportToJson(const EvalReport& report);
// Aligned columns: one row per category plus an overall row.
std::string ReportTable(const EvalReport& report);

}  // namespace vlqa
