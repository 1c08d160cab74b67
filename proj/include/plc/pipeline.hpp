#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "plc/config.hpp"
#include "plc/correction.hpp"
#include "plc/noise.hpp"

namespace plc {

/// Materialized inputs of one run: datasets plus the oracle when the data is
/// synthetic (or an oracle sidecar was supplied).
struct PipelineData {
  WorkingDataset train;
  WorkingDataset test;
  std::optional<PosteriorOracle> oracle;
};

PipelineData prepare_data(const RunConfig& config);

/// Applies the configured noise to the training split in place and returns
/// the report. noise.kind = hybrid corrupts feature-dependent first, then
/// overlays the i.i.d. transition noise.
NoiseReport apply_noise(const RunConfig& config, PipelineData& data);

/// Outcome of cmd_run / cmd_standard, kept for aggregation by sweeps.
struct RunArtifacts {
  nlohmann::json report;
  std::vector<RoundRecord> rounds;
  double initial_purity = 0.0;
  double final_purity = 0.0;
  double final_test_accuracy = 0.0;
};

/// Full pipeline (generate/load -> corrupt -> train [-> correct] -> evaluate).
/// Does not touch the filesystem; command wrappers persist the artifacts.
RunArtifacts execute_run(const RunConfig& config, bool standard,
                         const RoundObserver& observer = {});

// Command implementations behind the CLI; they write into config.out_dir and
// throw on failure (the CLI maps exception types to exit codes).
void cmd_gen(const RunConfig& config);
void cmd_corrupt(const RunConfig& config);
void cmd_run(const RunConfig& config);
void cmd_standard(const RunConfig& config);
void cmd_sweep(const RunConfig& config);
void cmd_check_theory(const RunConfig& config, const std::string& report_path);

}  // namespace plc
