#ifndef EDIAG_ORCHESTRATOR_H_
#define EDIAG_ORCHESTRATOR_H_

// Runs an experiment plan: optional warm-up, then every (variant, repetition)
// pair in a seeded random order, each with a timestamped log and a concurrent
// energy sampler, separated by a rest period.
//
// Operator preconditions that the tool does not enforce: fixed CPU
// frequency/voltage, and moving unrelated processes off the pinned cores.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ediag/power_sampling.h"

namespace ediag {

struct VariantSpec {
  std::string label;
  std::vector<std::string> command;
  std::map<std::string, std::string> env;
  std::string working_dir;
  std::optional<std::vector<int>> cpu_affinity;
};

struct WarmupSpec {
  std::vector<std::string> command;
  double duration_s = 360;
};

enum class BackendKind { kSysfs, kReplay, kSynthetic };

std::string_view BackendKindName(BackendKind kind);
// Accepts "sysfs", "replay", "synthetic"; throws kInvalidArgument otherwise.
BackendKind ParseBackendKind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::kSynthetic;
  double synthetic_watts = 5.0;                // synthetic
  std::string sysfs_root = "/sys/class/powercap";  // sysfs
  std::string replay_csv;                      // replay
  uint64_t replay_range_uj = SyntheticBackend::kDefaultRangeUj;
};

struct ExperimentPlan {
  std::vector<VariantSpec> variants;
  int repetitions = 30;
  std::optional<WarmupSpec> warmup;
  double rest_between_s = 30;
  int64_t sample_interval_ms = 100;
  uint64_t shuffle_seed = 0;
  BackendConfig backend;
  // Empty selects the backend's first domain.
  std::string domain_id;
};

// Throws kInvalidArgument describing the first violated invariant.
void ValidatePlan(const ExperimentPlan& plan);

// JSON with snake_case keys mirroring ExperimentPlan. When the document has
// no "backend" key, `default_backend` (typically from EDIAG_BACKEND) is used.
ExperimentPlan PlanFromJson(std::string_view json_text,
                            std::optional<BackendKind> default_backend = {});
std::string PlanToJson(const ExperimentPlan& plan);

struct ScheduleEntry {
  std::string variant_label;
  int repetition_index = 0;

  bool operator==(const ScheduleEntry&) const = default;
};

// Every variant appears `repetitions` times, in a Fisher-Yates order driven by
// SeededRng(plan.shuffle_seed). The same seed always yields the same order.
std::vector<ScheduleEntry> Schedule(const ExperimentPlan& plan);

struct RunArtifacts {
  std::string variant_label;
  int repetition_index = 0;
  int run_order_index = 0;
  int64_t start_epoch_ms = 0;
  int64_t end_epoch_ms = 0;
  int exit_code = 0;
  std::filesystem::path log_path;
  SampleSeries samples;
  // Epoch time of the sampler's t_ms = 0.
  int64_t sampler_origin_epoch_ms = 0;
  // Non-fatal problems, e.g. an affinity request the platform refused.
  std::vector<std::string> warnings;
};

// Instantiates the configured backend with `clock` as its time source.
std::unique_ptr<EnergyBackend> MakeBackend(const BackendConfig& config,
                                           std::shared_ptr<const Clock> clock);

// Launches one run into `run_dir` (created if needed), writing log.txt,
// samples.csv and meta.json, then rests for plan.rest_between_s.
// Throws kSpawnFailure if the command cannot be started; a nonzero exit
// status is recorded, not thrown.
RunArtifacts ExecuteRun(const ScheduleEntry& entry, int run_order_index,
                        const ExperimentPlan& plan,
                        const std::filesystem::path& run_dir);

// Runs the warm-up command until it exits or the configured duration
// elapses, whichever is first; a command still running at the deadline is
// terminated. No-op when the plan has no warm-up.
void RunWarmup(const ExperimentPlan& plan);

// Warm-up, schedule, and every run under `out_dir` as
// `<run_order_index>_<label>_<rep>/`.
std::vector<RunArtifacts> RunPlan(const ExperimentPlan& plan,
                                  const std::filesystem::path& out_dir);

std::string RunDirName(int run_order_index, std::string_view label, int rep);

// meta.json round trip. Loading also reads samples.csv from the same dir.
std::string RunMetaToJson(const RunArtifacts& run);
RunArtifacts LoadRun(const std::filesystem::path& run_dir);

}  // namespace ediag

#endif  // EDIAG_ORCHESTRATOR_H_
