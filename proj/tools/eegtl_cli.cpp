#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "eegtl/cli.hpp"

namespace {

using namespace eegtl;
using namespace eegtl::cli;

struct Options {
  std::string config;
  Overrides overrides;
  std::vector<std::string> runs;
};

void add_common(CLI::App* cmd, Options& o, bool config_required) {
  auto* config = cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (config_required) config->required();
  config->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.overrides.seed, "master seed");
  cmd->add_option("--out", o.overrides.out, "output directory");
}

void add_training(CLI::App* cmd, Options& o) {
  cmd->add_option("--strategy", o.overrides.strategy,
                  "standard|distributed|split|frozen|transfer_standard|transfer_split");
  cmd->add_option("--freeze-depth", o.overrides.freeze_depth, "none|block1|block1+2");
  cmd->add_option("--kappa", o.overrides.kappa, "paper|cohen");
}

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig config = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  apply_overrides(config, o.overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"EEG motor-imagery training and transfer toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic epoch corpus");
  add_common(synth, o, true);
  auto* train = app.add_subcommand("train", "train one model per held-out subject");
  add_common(train, o, true);
  add_training(train, o);
  auto* transfer = app.add_subcommand("transfer", "retrain a pretrained checkpoint on new data");
  add_common(transfer, o, true);
  add_training(transfer, o);
  auto* search = app.add_subcommand("hypersearch", "sequential dropout, filter and channel search");
  add_common(search, o, true);
  add_training(search, o);
  auto* report = app.add_subcommand("report", "aggregate run directories into summary tables");
  add_common(report, o, false);
  report->add_option("runs", o.runs, "run directories")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cmd_synth(resolve(o));
    } else if (train->parsed()) {
      cmd_train(resolve(o));
    } else if (transfer->parsed()) {
      cmd_transfer(resolve(o));
    } else if (search->parsed()) {
      cmd_hypersearch(resolve(o));
    } else if (report->parsed()) {
      const ExperimentConfig config = resolve(o);
      std::vector<std::filesystem::path> runs = config.report_runs;
      runs.insert(runs.end(), o.runs.begin(), o.runs.end());
      cmd_report(runs, config.out);
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
