#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlqa/config.h"
#include "vlqa/dataset.h"
#include "vlqa/model.h"

namespace vlqa {

inline constexpr double kDeltaEpsilon = 1e-4;

// (acc_full - acc_minus) / (acc_minus + 1e-4)
double DeltaX(double acc_full, double acc_minus);
// (sim_full - sim_minus) / sigma; degenerate-input error unless sigma > 0.
double CSem(double sim_full, double sim_minus, double sigma);

const std::vector<Knockout>& AllKnockouts();
std::string KnockoutName(Knockout target);
// Configuration error listing the valid names for anything else.
Knockout ParseKnockout(const std::string& name);
std::vector<Knockout> ParseKnockoutList(const std::string& comma_separated);
std::string ValidKnockoutNames();

struct AblationRow {
  std::string target;
  double acc_full = 0.0;
  double acc_minus = 0.0;
  double delta_x = 0.0;
  double sim_full = 0.0;
  double sim_minus = 0.0;
  std::optional<double> c_sem;  // absent when sigma_sem is 0
};

struct AblationReport {
  std::vector<AblationRow> rows;
  double sigma_sem = 0.0;
  double epsilon = kDeltaEpsilon;
  bool retrained = true;
  std::size_t n = 0;
};

struct AblationInputs {
  const Manifest* manifest = nullptr;
  const std::vector<EncodedSample>* train = nullptr;
  const std::vector<EncodedSample>* test = nullptr;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains the full model, then each variant. Variants retrain from the same
// seed unless config.ablation_retrain is false, in which case they reuse the
// trained full-model parameters unchanged.
AblationReport RunAblation(const RunConfig& config, const AblationInputs& inputs, const std::vector<Knockout>& targets,
                           const ProgressFn& progress = {});

nlohmann::json AblationToJson(const AblationReport& report);
nlohmann::json AblationRowToJson(const AblationRow& row, const AblationReport& report);
std::string AblationTable(const AblationReport& report);

}  // namespace vlqa
