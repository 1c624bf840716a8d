#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegtl/filter.hpp"
#include "eegtl/hypersearch.hpp"
#include "eegtl/strategies.hpp"
#include "eegtl/synth.hpp"

namespace eegtl::cli {

inline constexpr const char* kVersion = "0.1.0";

/// A module error annotated with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Everything a run needs; parsed from a JSON config file.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/default";
  std::optional<std::filesystem::path> data_path;
  std::optional<SynthConfig> synth;
  std::vector<std::string> channels;  // empty keeps every channel
  std::optional<FilterSpec> filter;
  TrainingPlan plan;
  std::size_t folds = 4;
  SearchSpace search;
  std::vector<std::filesystem::path> report_runs;

  /// Exactly one data source; referenced paths must exist.
  void validate(bool needs_data = true) const;
  /// Fully resolved snapshot; feeding it back reproduces the run.
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base = {});
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides, applied after the config file and environment.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> strategy;
  std::optional<std::string> freeze_depth;
  std::optional<std::string> kappa;
};

/// EEGTL_OUT replaces the output directory, then the flags are applied.
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// Loads or generates the datasets, then filters and selects channels.
Datasets prepare_data(const ExperimentConfig& config);

void cmd_synth(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_transfer(const ExperimentConfig& config);
void cmd_hypersearch(const ExperimentConfig& config);
/// Aggregates the report.json of each run directory into `out`.
void cmd_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

/// Sets the spdlog level from EEGTL_LOG_LEVEL when present.
void configure_logging();

}  // namespace eegtl::cli
