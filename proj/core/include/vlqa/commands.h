#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vlqa/config.h"
#include "vlqa/dataset_io.h"

// Command implementations behind the vlqa executable. Each returns normally
// on success and throws vlqa::Error otherwise; JSON outputs depend only on the
// config, seed and inputs.
namespace vlqa {

struct CommandOptions {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> targets;
  std::optional<std::string> fusion;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::string> split;
  std::optional<std::size_t> count;
  std::optional<double> noise;
  std::optional<std::size_t> epochs;
  bool resume = false;
};

RunConfig ResolveConfig(const CommandOptions& options);

// Train/holdout partition: the last `holdout` samples are held out.
std::vector<SampleRecord> SelectSplit(const std::vector<SampleRecord>& samples, std::size_t holdout,
                                      const std::string& split);

void CmdConfig(const CommandOptions& options, std::ostream& out);
void CmdGen(const CommandOptions& options, std::ostream& out);
void CmdTrain(const CommandOptions& options, std::ostream& out);
void CmdEval(const CommandOptions& options, std::ostream& out);
void CmdAblate(const CommandOptions& options, std::ostream& out, std::ostream& log);
// Trains every fusion mode on the same split and reports Top-1 with 95% intervals.
void CmdCompare(const CommandOptions& options, std::ostream& out, std::ostream& log);

}  // namespace vlqa
