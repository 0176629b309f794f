#ifndef EDIAG_ANALYSIS_REPORT_H_
#define EDIAG_ANALYSIS_REPORT_H_

// Per-variant statistics, median/quartile power bands, variant differences,
// suspect ranking over high-gap regions, and report rendering.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ediag/log_alignment.h"
#include "ediag/orchestrator.h"
#include "ediag/power_sampling.h"

namespace ediag {

// One measured run, on a time base where t = 0 is the child's start.
struct RunCurve {
  std::string label;
  int repetition_index = 0;
  double duration_ms = 0;
  std::vector<PowerPoint> power;
};

// Shifts the sampler's time base to the child start and derives power.
RunCurve CurveFromRun(const RunArtifacts& run);

// Linear interpolation between order statistics ("type 7"): h = (n-1)p.
double Quantile(std::vector<double> values, double p);

struct Summary {
  double mean = 0;
  double median = 0;
  double std = 0;  // sample standard deviation, 0 for n = 1
  double min = 0;
  double max = 0;
  double q25 = 0;
  double q75 = 0;
  double skewness = 0;  // adjusted Fisher-Pearson, 0 for n < 3
  size_t count = 0;
};

Summary Summarize(const std::vector<double>& values);

struct VariantStats {
  std::string label;
  std::vector<double> duration_s;
  std::vector<double> energy_j;
  Summary duration;
  Summary energy;

  // Skewness of the energy distribution within +-1.
  bool symmetric() const;
};

// energy_j per run integrates the power curve over [0, duration].
// Throws kNoRuns.
VariantStats SummarizeVariant(const std::vector<RunCurve>& runs);

// (subject - baseline) / baseline * 100. Throws kZeroBaseline.
double EnergyDiffPct(double subject_j, double baseline_j);

struct PowerBand {
  std::string label;
  double grid_step_ms = 0;
  std::vector<double> grid_t_ms;
  std::vector<double> median_w;
  std::vector<double> q25_w;
  std::vector<double> q75_w;

  std::vector<PowerPoint> MedianCurve() const;
};

// Grid 0, step, 2*step, ... up to the shortest run's duration; each run is
// linearly resampled onto it. Throws kNoRuns, kNoOverlap.
PowerBand ComputePowerBand(const std::vector<RunCurve>& runs,
                           double grid_step_ms);

struct PowerGap {
  double t_ms = 0;
  double gap_w = 0;
  double gap_pct = 0;
};

// Largest subject-minus-baseline median difference; the earliest wins ties.
// Throws kGridMismatch.
PowerGap MaxPowerGap(const PowerBand& subject, const PowerBand& baseline);

struct SuspectRow {
  std::string function;
  double score = 0;  // ns * W
  double share_in_gap_regions = 0;
  int64_t total_ns_in_gap_regions = 0;
};

struct RegionGap {
  int ordinal = 0;
  double energy_t0_ms = 0;
  double energy_t1_ms = 0;
  double gap_w = 0;
  bool is_gap_region = false;
};

struct SuspectRanking {
  std::vector<SuspectRow> rows;
  std::vector<RegionGap> regions;
  // Set when no region reaches the threshold ("NoGapRegions: ...").
  std::optional<std::string> diagnostic;
};

inline constexpr double kDefaultGapThresholdW = 0.25;

// region gap = time-average over the region of (subject - baseline) median
// power; regions at or above the threshold are gap regions;
// score(f) = sum over gap regions of total_ns(f) * region gap.
SuspectRanking RankSuspects(const AlignedProfile& profile,
                            const PowerBand& subject, const PowerBand& baseline,
                            double gap_threshold_w = kDefaultGapThresholdW);

struct ReportInputs {
  std::vector<VariantStats> stats;
  std::vector<PowerBand> bands;
  std::string baseline_label;
  std::string subject_label;
  std::optional<PowerGap> max_gap;
  SuspectRanking ranking;
  AlignedProfile profile;
  nlohmann::json config_echo = nlohmann::json::object();
};

// Writes report.json, band_<label>.csv per band and overlay.svg.
// Decimal output carries six significant digits. Throws kIoError.
void RenderReport(const ReportInputs& inputs,
                  const std::filesystem::path& out_dir);

std::string ReportJson(const ReportInputs& inputs);
std::string BandCsv(const PowerBand& band);
std::string OverlaySvg(const ReportInputs& inputs);

}  // namespace ediag

#endif  // EDIAG_ANALYSIS_REPORT_H_
