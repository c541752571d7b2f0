#include "vlqa/trainer.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include "vlqa/errors.h"
#include "vlqa/rng.h"

namespace vlqa {

std::size_t StepsPerEpoch(std::size_t samples, std::size_t batch_size) {
  return (samples + batch_size - 1) / batch_size;
}

std::vector<std::size_t> EpochOrder(std::size_t samples, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(MixSeed(seed, 1000 + epoch));
  rng.Shuffle(order);
  return order;
}

double Top1Accuracy(const Model& model, const std::vector<EncodedSample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const EncodedSample& s : samples) hits += model.Predict(s).ranking.front() == s.answer;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

Trainer::Trainer(Model& model, const RunConfig& config) : model_(model), config_(config) { Validate(config_); }

double Trainer::LearningRate(std::size_t step) const {
  const double base = config_.optimizer.learning_rate;
  if (config_.optimizer.schedule != "cosine" || total_steps_ == 0) return base;
  const double progress = static_cast<double>(step - 1) / static_cast<double>(total_steps_);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

double Trainer::Step(std::span<const EncodedSample* const> batch) {
  ParameterStore& params = model_.params();
  const std::size_t step_no = state_.step + 1;
  params.ZeroGrad();
  double total = 0.0;
  try {
    for (const EncodedSample* s : batch) {
      Tape tape(&params);
      const Var loss = model_.Loss(tape, *s, config_.answer_embedding_weight);
      total += loss.value().item();
      tape.Backward(loss);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    throw Error(ErrorKind::kDivergence, "training diverged at step " + std::to_string(step_no) + ": " + e.what());
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) {
    throw Error(ErrorKind::kDivergence, "non-finite loss at step " + std::to_string(step_no));
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  double norm_sq = 0.0;
  for (auto& [name, entry] : params)
    for (double& g : entry.grad.mutable_data()) {
      g *= inv;
      norm_sq += g * g;
    }
  if (!std::isfinite(norm_sq)) {
    throw Error(ErrorKind::kDivergence, "non-finite gradient at step " + std::to_string(step_no));
  }
  const double clip = config_.optimizer.clip_norm;
  const double scale = clip > 0 && norm_sq > clip * clip ? clip / std::sqrt(norm_sq) : 1.0;
  const double lr = LearningRate(step_no), mu = config_.optimizer.momentum;
  for (auto& [name, entry] : params) {
    auto it = state_.velocity.find(name);
    if (it == state_.velocity.end()) it = state_.velocity.emplace(name, Tensor(entry.value.shape())).first;
    auto v = it->second.mutable_data();
    auto p = entry.value.mutable_data();
    const auto g = entry.grad.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] + scale * g[i];
      p[i] -= lr * v[i];
    }
  }
  params.ZeroGrad();
  state_.step = step_no;
  step_losses_.push_back(mean);
  return mean;
}

std::vector<EpochLog> Trainer::Train(const std::vector<EncodedSample>& train, const std::vector<EncodedSample>& holdout,
                                     const std::function<void(const EpochLog&)>& on_epoch, std::size_t max_steps) {
  if (train.empty()) throw Error(ErrorKind::kPrecondition, "training set is empty");
  const std::size_t batch = config_.optimizer.batch_size;
  const std::size_t per_epoch = StepsPerEpoch(train.size(), batch);
  const std::size_t total = per_epoch * config_.optimizer.epochs;
  total_steps_ = total;
  const std::size_t stop = max_steps ? std::min(total, max_steps) : total;
  std::vector<EpochLog> logs;
  while (state_.step < stop) {
    const std::size_t epoch = state_.step / per_epoch;
    const std::vector<std::size_t> order = EpochOrder(train.size(), config_.seed, epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = state_.step % per_epoch; b < per_epoch && state_.step < stop; ++b) {
      std::vector<const EncodedSample*> items;
      for (std::size_t k = b * batch; k < std::min(train.size(), (b + 1) * batch); ++k) items.push_back(&train[order[k]]);
      loss_sum += Step(items) * static_cast<double>(items.size());
      seen += items.size();
    }
    EpochLog log{epoch + 1, state_.step, loss_sum / static_cast<double>(seen), std::nullopt};
    if (!holdout.empty()) log.holdout_top1 = Top1Accuracy(model_, holdout);
    if (on_epoch) on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

}  // namespace vlqa
