#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vlqa/commands.h"
#include "vlqa/errors.h"

namespace {

void AddCommon(CLI::App* cmd, vlqa::CommandOptions& o) {
  cmd->add_option("--config", o.config_path, "run config JSON (defaults when omitted)");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--data", o.data, "dataset directory");
  cmd->add_option("--fusion", o.fusion, "concat | scalar | hier");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vlqa: hierarchical cross-modal question answering over synthetic industrial scenes"};
  app.require_subcommand(1);
  vlqa::CommandOptions o;

  auto* config = app.add_subcommand("config", "write the effective run config");
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "train a model and save a checkpoint");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* ablate = app.add_subcommand("ablate", "module knockout experiments");
  auto* compare = app.add_subcommand("compare", "train every fusion mode and compare Top-1");
  for (auto* cmd : {config, gen, train, eval, ablate, compare}) AddCommon(cmd, o);
  for (auto* cmd : {config, gen}) {
    cmd->add_option("--count", o.count, "number of samples");
    cmd->add_option("--noise", o.noise, "feature noise level");
  }
  for (auto* cmd : {config, train, ablate, compare}) cmd->add_option("--epochs", o.epochs, "training epochs");
  for (auto* cmd : {train, eval}) cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  train->add_flag("--resume", o.resume, "continue from the checkpoint's step counter");
  eval->add_option("--split", o.split, "holdout | train | all");
  ablate->add_option("--targets", o.targets, "comma-separated knockout targets, or all");

  CLI11_PARSE(app, argc, argv);
  try {
    if (config->parsed()) vlqa::CmdConfig(o, std::cout);
    if (gen->parsed()) vlqa::CmdGen(o, std::cout);
    if (train->parsed()) vlqa::CmdTrain(o, std::cout);
    if (eval->parsed()) vlqa::CmdEval(o, std::cout);
    if (ablate->parsed()) vlqa::CmdAblate(o, std::cout, std::cerr);
    if (compare->parsed()) vlqa::CmdCompare(o, std::cout, std::cerr);
  } catch (const vlqa::Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
