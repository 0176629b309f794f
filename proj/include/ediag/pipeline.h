#ifndef EDIAG_PIPELINE_H_
#define EDIAG_PIPELINE_H_

// Glue between the modules: loading recorded runs, turning runs plus an
// aligned profile into report inputs, and replaying a whole recorded
// experiment from a fixture directory.
//
// Fixture layout:
//   runs/<order>_<label>_<rep>/{log.txt, samples.csv, meta.json}
//   traced/{log.txt, meta.json}     meta needs start_epoch_ms, end_epoch_ms
//   trace.json                      Chrome trace-event timeline of the traced run
//   replay.json                     labels and analysis parameters

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ediag/analysis_report.h"
#include "ediag/log_alignment.h"
#include "ediag/orchestrator.h"

namespace ediag {

// Every subdirectory of `runs_dir` holding a meta.json, in name order.
// Throws kIoError when the directory is missing.
std::vector<RunArtifacts> LoadRunsDir(const std::filesystem::path& runs_dir);

struct AnalysisOptions {
  std::string baseline_label;
  std::string subject_label;
  double gap_threshold_w = kDefaultGapThresholdW;
  double grid_step_ms = 100;
};

// Statistics for every variant (baseline first, the rest by label), bands
// for every variant, the subject-vs-baseline power gap and suspect ranking.
// Throws kInvalidArgument for an unknown label.
ReportInputs AnalyzeRuns(const std::vector<RunArtifacts>& runs,
                         const AlignedProfile& profile,
                         const AnalysisOptions& options);

// A timestamped log and its run window, as stored next to a run.
struct LoggedRun {
  CleanedLog log;
  double end_ms = 0;  // run duration
};

// Reads `log_path`; the run window comes from meta.json in the same
// directory when present, otherwise from the first and last timestamps.
LoggedRun LoadLoggedRun(const std::filesystem::path& log_path);

struct ReplayConfig {
  std::string baseline_label;
  std::string subject_label;
  double gap_threshold_w = kDefaultGapThresholdW;
  double grid_step_ms = 100;
  CheckpointConfig checkpoints;
  uint64_t seed = 0;
};

ReplayConfig ReplayConfigFromJson(std::string_view json_text);
std::string ReplayConfigToJson(const ReplayConfig& config);

nlohmann::json ConfigEcho(const ReplayConfig& config);

// Aligns the subject's lowest-repetition run with the traced run, writes
// aligned_profile.json, then analyses all runs and renders the report into
// `out_dir`. `config` overrides replay.json when given. Throws
// kMissingFixture when a required piece is absent.
ReportInputs ReplayPipeline(const std::filesystem::path& fixture_dir,
                            const std::filesystem::path& out_dir,
                            const std::optional<ReplayConfig>& config = {});

struct FixtureOptions {
  uint64_t seed = 42;
  // Subject runs draw the same power as the baseline.
  bool identical_variants = false;
  int repetitions = 3;
  std::string hot_function = "memcpy";
};

// Writes a synthetic two-variant fixture. In a few stretches of the run the
// subject draws extra power while the traced run spends most of its time in
// `hot_function`; elsewhere another function dominates, so the hot function
// is not the top function of the trace overall.
void GenerateReplayFixture(const std::filesystem::path& dir,
                           const FixtureOptions& options = {});

}  // namespace ediag

#endif  // EDIAG_PIPELINE_H_
