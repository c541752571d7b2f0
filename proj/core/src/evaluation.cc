#include "vlqa/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vlqa/errors.h"

namespace vlqa {
namespace {

void CheckLengths(std::size_t rankings, std::size_t golds) {
  if (rankings != golds) {
    throw Error(ErrorKind::kEvaluation, std::to_string(rankings) + " predictions for " + std::to_string(golds) + " golds");
  }
  if (rankings == 0) throw Error(ErrorKind::kEvaluation, "nothing to evaluate");
}

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::size_t RankOf(const std::vector<std::size_t>& ranking, std::size_t gold) {
  auto it = std::find(ranking.begin(), ranking.end(), gold);
  if (it == ranking.end()) {
    throw Error(ErrorKind::kEvaluation, "gold answer " + std::to_string(gold) + " missing from the ranked list");
  }
  return static_cast<std::size_t>(it - ranking.begin()) + 1;
}

double Top1(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds) {
  CheckLengths(rankings.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hits += !rankings[i].empty() && rankings[i].front() == golds[i];
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

double Mrr(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds) {
  CheckLengths(rankings.size(), golds.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) sum += 1.0 / static_cast<double>(RankOf(rankings[i], golds[i]));
  return sum / static_cast<double>(golds.size());
}

double SimSem(std::span<const double> u_p, std::span<const double> u_g, double gamma, double penalty) {
  if (u_p.size() != u_g.size()) throw Error(ErrorKind::kDimension, "answer embeddings differ in width");
  double dot = 0.0, np = 0.0, ng = 0.0;
  for (std::size_t k = 0; k < u_p.size(); ++k) {
    dot += u_p[k] * u_g[k];
    np += u_p[k] * u_p[k];
    ng += u_g[k] * u_g[k];
  }
  if (np == 0.0 || ng == 0.0) throw Error(ErrorKind::kDegenerateInput, "answer embedding has zero norm");
  return dot / (std::sqrt(np) * std::sqrt(ng) + gamma * penalty);
}

AnswerEmbeddings::AnswerEmbeddings(Tensor table, std::vector<std::size_t> categories)
    : table_(std::move(table)), categories_(std::move(categories)) {
  if (table_.rank() != 2 || table_.dim(0) != categories_.size()) {
    throw Error(ErrorKind::kDimension, "answer table " + ShapeString(table_.shape()) + " for " +
                                           std::to_string(categories_.size()) + " answers");
  }
  for (std::size_t a = 0; a < size(); ++a) {
    double norm = 0.0;
    for (double x : Row(a)) norm += x * x;
    if (norm == 0.0) throw Error(ErrorKind::kDegenerateInput, "answer " + std::to_string(a) + " has a zero embedding");
  }
}

AnswerEmbeddings AnswerEmbeddings::FromModel(const Model& model, const Manifest& manifest) {
  std::vector<std::size_t> cats;
  for (std::size_t a = 0; a < manifest.answer_vocab.size(); ++a) cats.push_back(manifest.AnswerCategoryId(a));
  return AnswerEmbeddings(model.AnswerEmbeddingTable(), std::move(cats));
}

std::span<const double> AnswerEmbeddings::Row(std::size_t answer) const {
  if (answer >= size()) throw Error(ErrorKind::kVocabulary, "answer " + std::to_string(answer) + " has no embedding");
  const std::size_t d = table_.dim(1);
  return table_.data().subspan(answer * d, d);
}

double AnswerEmbeddings::TaskPenalty(std::size_t a, std::size_t b) const {
  return categories_.at(a) == categories_.at(b) ? 0.0 : 1.0;
}

double AnswerEmbeddings::SimSem(std::size_t pred, std::size_t gold, double gamma) const {
  return vlqa::SimSem(Row(pred), Row(gold), gamma, TaskPenalty(pred, gold));
}

EvalReport Score(std::span<const std::vector<std::size_t>> rankings, std::span<const std::size_t> golds,
                 std::span<const std::string> categories, const AnswerEmbeddings& embeddings, double gamma) {
  CheckLengths(rankings.size(), golds.size());
  if (categories.size() != golds.size()) throw Error(ErrorKind::kEvaluation, "category labels do not match samples");
  EvalReport r;
  r.n = golds.size();
  r.top1 = Top1(rankings, golds);
  r.mrr = Mrr(rankings, golds);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < r.n; ++i) {
    r.predictions.push_back(rankings[i].front());
    r.per_sample_sim.push_back(embeddings.SimSem(rankings[i].front(), golds[i], gamma));
    members[categories[i]].push_back(i);
  }
  double sum = 0.0;
  for (double s : r.per_sample_sim) sum += s;
  r.sim_sem_mean = sum / static_cast<double>(r.n);
  double var = 0.0;
  for (double s : r.per_sample_sim) var += (s - r.sim_sem_mean) * (s - r.sim_sem_mean);
  r.sim_sem_std = std::sqrt(var / static_cast<double>(r.n));

  double category_sum = 0.0;
  for (const auto& [name, idx] : members) {
    std::vector<std::vector<std::size_t>> rk;
    std::vector<std::size_t> gd;
    double sim = 0.0;
    for (std::size_t i : idx) {
      rk.push_back(rankings[i]);
      gd.push_back(golds[i]);
      sim += r.per_sample_sim[i];
    }
    CategoryReport c{idx.size(), Top1(rk, gd), Mrr(rk, gd), sim / static_cast<double>(idx.size())};
    category_sum += c.sim_sem;
    r.by_category[name] = c;
  }
  r.sim_sem_category_mean = category_sum / static_cast<double>(members.size());
  return r;
}

EvalReport Evaluate(const Model& model, const std::vector<EncodedSample>& samples, const Manifest& manifest,
                    const AnswerEmbeddings& embeddings, double gamma,
                    const std::optional<std::vector<std::size_t>>& candidates) {
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::size_t> golds;
  std::vector<std::string> categories;
  for (const EncodedSample& s : samples) {
    std::vector<std::size_t> ranking = model.Predict(s).ranking;
    if (candidates) {
      std::erase_if(ranking, [&](std::size_t a) {
        return std::find(candidates->begin(), candidates->end(), a) == candidates->end();
      });
    }
    rankings.push_back(std::move(ranking));
    golds.push_back(s.answer);
    categories.push_back(manifest.categories.at(s.category));
  }
  return Score(rankings, golds, categories, embeddings, gamma);
}

nlohmann::json ReportToJson(const EvalReport& r) {
  nlohmann::json by_cat = nlohmann::json::object(), top1 = nlohmann::json::object(),
                 mrr = nlohmann::json::object(), counts = nlohmann::json::object();
  for (const auto& [name, c] : r.by_category) {
    by_cat[name] = c.sim_sem;
    top1[name] = c.top1;
    mrr[name] = c.mrr;
    counts[name] = c.n;
  }
  return {
      {"top1", r.top1},
      {"mrr", r.mrr},
      {"sim_sem_mean", r.sim_sem_mean},
      {"sim_sem_by_category", by_cat},
      {"n", r.n},
      {"sim_sem_category_mean", r.sim_sem_category_mean},
      {"sim_sem_std", r.sim_sem_std},
      {"top1_by_category", top1},
      {"mrr_by_category", mrr},
      {"n_by_category", counts},
  };
}

std::string ReportTable(const EvalReport& r) {
  std::size_t width = std::string("category").size();
  for (const auto& [name, c] : r.by_category) width = std::max(width, name.size());
  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& n, const std::string& a, const std::string& b,
                 const std::string& c) {
    out << name << std::string(width - name.size() + 2, ' ');
    for (const std::string* cell : {&n, &a, &b, &c}) out << std::string(10 - std::min<std::size_t>(10, cell->size()), ' ') << *cell;
    out << "\n";
  };
  row("category", "n", "top1", "mrr", "sim_sem");
  for (const auto& [name, c] : r.by_category) row(name, std::to_string(c.n), Fixed(c.top1), Fixed(c.mrr), Fixed(c.sim_sem));
  row("overall", std::to_string(r.n), Fixed(r.top1), Fixed(r.mrr), Fixed(r.sim_sem_mean));
  return out.str();
}

}  // namespace vlqa
