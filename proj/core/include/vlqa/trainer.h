#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlqa/config.h"
#include "vlqa/model.h"

namespace vlqa {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // steps completed so far
  double mean_loss = 0.0;
  std::optional<double> holdout_top1;
};

struct TrainerState {
  std::size_t step = 0;
  std::map<std::string, Tensor> velocity;
};

// Minibatch SGD with momentum: v <- mu v + g, p <- p - lr v, where g is the
// batch-mean gradient clipped to a maximum global norm and lr optionally
// follows a cosine decay to zero over the whole run. Epoch e visits the
// training set in the order of a shuffle seeded by MixSeed(seed, 1000 + e),
// so a run resumed at any step follows the uninterrupted trajectory.
class Trainer {
 public:
  Trainer(Model& model, const RunConfig& config);

  // Trains until the configured epoch count, or until `max_steps` total steps
  // when non-zero.
  std::vector<EpochLog> Train(const std::vector<EncodedSample>& train, const std::vector<EncodedSample>& holdout,
                              const std::function<void(const EpochLog&)>& on_epoch = {}, std::size_t max_steps = 0);

  // One update on `batch`; returns the mean loss. Divergence error on a
  // non-finite loss or gradient.
  double Step(std::span<const EncodedSample* const> batch);

  std::size_t step() const { return state_.step; }
  const TrainerState& state() const { return state_; }
  void SetState(TrainerState state) { state_ = std::move(state); }
  // Step size for the update numbered `step` (1-based) of a run of `total_steps`.
  double LearningRate(std::size_t step) const;
  void SetTotalSteps(std::size_t total) { total_steps_ = total; }
  // Mean loss of every step taken by this trainer, in order.
  const std::vector<double>& step_losses() const { return step_losses_; }

 private:
  Model& model_;
  RunConfig config_;
  TrainerState state_;
  std::vector<double> step_losses_;
  std::size_t total_steps_ = 0;
};

std::size_t StepsPerEpoch(std::size_t samples, std::size_t batch_size);
// Visiting order of epoch `epoch` (0-based).
std::vector<std::size_t> EpochOrder(std::size_t samples, std::uint64_t seed, std::size_t epoch);
double Top1Accuracy(const Model& model, const std::vector<EncodedSample>& samples);

}  // namespace vlqa
