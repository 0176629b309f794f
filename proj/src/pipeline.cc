#include "ediag/pipeline.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "ediag/error.h"
#include "ediag/rng.h"
#include "ediag/trace_ingestion.h"
#include "util.h"

namespace ediag {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<RunArtifacts> LoadRunsDir(const fs::path& runs_dir) {
  if (!fs::is_directory(runs_dir))
    throw Error(ErrorCode::kIoError, "no runs directory at " + runs_dir.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json"))
      dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunArtifacts> runs;
  for (const fs::path& d : dirs) runs.push_back(LoadRun(d));
  return runs;
}

ReportInputs AnalyzeRuns(const std::vector<RunArtifacts>& runs,
                         const AlignedProfile& profile,
                         const AnalysisOptions& options) {
  std::map<std::string, std::vector<RunCurve>> by_label;
  for (const RunArtifacts& r : runs) by_label[r.variant_label].push_back(CurveFromRun(r));
  for (const std::string& label : {options.baseline_label, options.subject_label}) {
    if (!by_label.count(label))
      throw Error(ErrorCode::kInvalidArgument, "no runs labelled '" + label + "'");
  }
  if (options.grid_step_ms <= 0)
    throw Error(ErrorCode::kInvalidArgument, "grid step must be > 0");

  ReportInputs in;
  in.baseline_label = options.baseline_label;
  in.subject_label = options.subject_label;
  std::vector<std::string> order = {options.baseline_label};
  for (const auto& [label, curves] : by_label)
    if (label != options.baseline_label) order.push_back(label);
  for (const std::string& label : order) {
    in.stats.push_back(SummarizeVariant(by_label[label]));
    PowerBand band = ComputePowerBand(by_label[label], options.grid_step_ms);
    band.label = label;
    in.bands.push_back(std::move(band));
  }
  const PowerBand& baseline = in.bands.front();
  const PowerBand* subject = nullptr;
  for (const PowerBand& b : in.bands)
    if (b.label == options.subject_label) subject = &b;

  // Compare over the common part of both grids.
  PowerBand s = *subject;
  PowerBand b = baseline;
  const size_t n = std::min(s.grid_t_ms.size(), b.grid_t_ms.size());
  for (PowerBand* band : {&s, &b}) {
    band->grid_t_ms.resize(n);
    band->median_w.resize(n);
    band->q25_w.resize(n);
    band->q75_w.resize(n);
  }
  if (options.subject_label != options.baseline_label)
    in.max_gap = MaxPowerGap(s, b);
  in.ranking = RankSuspects(profile, s, b, options.gap_threshold_w);
  in.profile = profile;
  return in;
}

LoggedRun LoadLoggedRun(const fs::path& log_path) {
  const std::string text = util::ReadFile(log_path);
  const fs::path meta_path = log_path.parent_path() / "meta.json";
  if (fs::exists(meta_path)) {
    json meta;
    try {
      meta = json::parse(util::ReadFile(meta_path));
      const int64_t start = meta.at("start_epoch_ms").get<int64_t>();
      const int64_t end = meta.at("end_epoch_ms").get<int64_t>();
      return {ParseTimestampedLog(text, start), static_cast<double>(end - start)};
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedJson, meta_path.string() + ": " + e.what());
    }
  }
  // No run window on record: the log itself bounds the run.
  CleanedLog probe = ParseTimestampedLog(text, 0);
  if (probe.lines.empty())
    throw Error(ErrorCode::kParseError, log_path.string() + ": empty log");
  const int64_t first = probe.lines.front().t_ms;
  LoggedRun run{ParseTimestampedLog(text, first), 0};
  run.end_ms = static_cast<double>(run.log.lines.back().t_ms);
  return run;
}

ReplayConfig ReplayConfigFromJson(std::string_view json_text) {
  ReplayConfig c;
  try {
    const json doc = json::parse(json_text);
    c.baseline_label = doc.at("baseline").get<std::string>();
    c.subject_label = doc.at("subject").get<std::string>();
    c.gap_threshold_w = doc.value("gap_threshold_w", c.gap_threshold_w);
    c.grid_step_ms = doc.value("grid_step_ms", c.grid_step_ms);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("checkpoint")) {
      const json& cp = doc["checkpoint"];
      c.checkpoints.max_multiplicity =
          cp.value("max_multiplicity", c.checkpoints.max_multiplicity);
      c.checkpoints.edge_discard = cp.value("edge_discard", c.checkpoints.edge_discard);
      c.checkpoints.min_checkpoints =
          cp.value("min_checkpoints", c.checkpoints.min_checkpoints);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, std::string("replay config: ") + e.what());
  }
  return c;
}

json ConfigEcho(const ReplayConfig& c) {
  return {{"baseline", c.baseline_label},
          {"subject", c.subject_label},
          {"gap_threshold_w", c.gap_threshold_w},
          {"grid_step_ms", c.grid_step_ms},
          {"seed", c.seed},
          {"checkpoint",
           {{"max_multiplicity", c.checkpoints.max_multiplicity},
            {"edge_discard", c.checkpoints.edge_discard},
            {"min_checkpoints", c.checkpoints.min_checkpoints}}}};
}

std::string ReplayConfigToJson(const ReplayConfig& config) {
  return ConfigEcho(config).dump(2) + "\n";
}

ReportInputs ReplayPipeline(const fs::path& fixture_dir, const fs::path& out_dir,
                            const std::optional<ReplayConfig>& config) {
  for (const char* piece : {"replay.json", "runs", "traced/log.txt", "trace.json"}) {
    if (!fs::exists(fixture_dir / piece)) {
      throw Error(ErrorCode::kMissingFixture,
                  (fixture_dir / piece).string() + " not found");
    }
  }
  const ReplayConfig cfg =
      config ? *config : ReplayConfigFromJson(util::ReadFile(fixture_dir / "replay.json"));

  const std::vector<RunArtifacts> runs = LoadRunsDir(fixture_dir / "runs");
  const RunArtifacts* energy_run = nullptr;
  for (const RunArtifacts& r : runs) {
    if (r.variant_label != cfg.subject_label) continue;
    if (!energy_run || r.repetition_index < energy_run->repetition_index)
      energy_run = &r;
  }
  if (!energy_run) {
    throw Error(ErrorCode::kMissingFixture,
                "no recorded run for subject '" + cfg.subject_label + "'");
  }

  const CleanedLog energy_log = ParseTimestampedLog(
      util::ReadFile(energy_run->log_path), energy_run->start_epoch_ms);
  const LoggedRun traced = LoadLoggedRun(fixture_dir / "traced" / "log.txt");
  const Timeline timeline =
      ParseTimelineChrome(util::ReadFile(fixture_dir / "trace.json"));
  const AlignmentResult alignment = AlignRuns(
      energy_log,
      static_cast<double>(energy_run->end_epoch_ms - energy_run->start_epoch_ms),
      traced.log, traced.end_ms, timeline.events, cfg.checkpoints);

  fs::create_directories(out_dir);
  util::WriteFile(out_dir / "aligned_profile.json", ProfileToJson(alignment.profile));

  ReportInputs inputs = AnalyzeRuns(
      runs, alignment.profile,
      {cfg.baseline_label, cfg.subject_label, cfg.gap_threshold_w, cfg.grid_step_ms});
  inputs.config_echo = ConfigEcho(cfg);
  RenderReport(inputs, out_dir);
  return inputs;
}

// Synthetic fixture ---------------------------------------------------------

namespace {

constexpr int kCheckpoints = 40;
constexpr double kRunMs = 8000;
constexpr double kTraceSlowdown = 1.6;
constexpr int64_t kSampleIntervalMs = 100;
constexpr int64_t kSamplerLeadMs = 40;
constexpr int64_t kEpochBase = 1'700'000'000'000;
// Checkpoint index ranges [first, last) where the subject draws extra power.
constexpr std::array<std::pair<int, int>, 2> kHotStretches = {{{12, 16}, {26, 29}}};

constexpr std::array<const char*, 20> kWordsA = {
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
    "hotel", "india", "juliet", "kilo", "lima", "mike", "november",
    "oscar", "papa", "quebec", "romeo", "sierra", "tango"};
constexpr std::array<const char*, 2> kWordsB = {"shard", "segment"};

bool InHotStretch(int checkpoint_gap) {
  for (const auto& [first, last] : kHotStretches)
    if (checkpoint_gap >= first && checkpoint_gap < last) return true;
  return false;
}

std::string CheckpointName(int j) {
  return std::string(kWordsA[static_cast<size_t>(j) % kWordsA.size()]) + " " +
         kWordsB[static_cast<size_t>(j) / kWordsA.size()];
}

std::string HexToken(SeededRng& rng, int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  // At least one digit and one letter so the token reads as an id.
  s += kHex[rng.Below(10)];
  s += kHex[10 + rng.Below(6)];
  while (static_cast<int>(s.size()) < len) s += kHex[rng.Below(16)];
  return s;
}

std::string Letters(SeededRng& rng, int len) {
  std::string s;
  for (int i = 0; i < len; ++i) s += static_cast<char>('a' + rng.Below(26));
  return s;
}

// Nominal checkpoint times in ms, shared by every run before per-run warping.
std::vector<double> NominalCheckpoints(SeededRng& rng) {
  std::vector<double> gaps;
  for (int j = 0; j < kCheckpoints; ++j) gaps.push_back(120 + 140 * rng.Unit());
  double sum = 0;
  for (double g : gaps) sum += g;
  std::vector<double> t;
  double acc = 0;
  for (double g : gaps) {
    acc += g;
    t.push_back(300 + (acc - gaps.front()) / (sum - gaps.front()) * (kRunMs - 600));
  }
  return t;
}

std::vector<double> WarpCheckpoints(const std::vector<double>& nominal,
                                    double scale, double jitter_ms,
                                    SeededRng& rng) {
  std::vector<double> t;
  for (double n : nominal)
    t.push_back(std::round(n * scale + jitter_ms * (2 * rng.Unit() - 1)));
  return t;
}

// Log text for one run; checkpoint j printed at cp_ms[j].
std::string MakeLog(int64_t start_epoch, double end_ms,
                    const std::vector<double>& cp_ms, SeededRng& rng) {
  std::string out;
  auto emit = [&](double t, const std::string& text) {
    out += "[" + std::to_string(start_epoch + std::llround(t)) + "] " + text + "\n";
  };
  emit(0, "boot sequence begin pid=" + std::to_string(1000 + rng.Below(9000)));
  double prev = 0;
  for (int j = 0; j < kCheckpoints; ++j) {
    const int fillers = static_cast<int>(rng.Below(3));
    for (int f = 0; f < fillers; ++f) {
      const double t = prev + (cp_ms[static_cast<size_t>(j)] - prev) * (f + 1) / (fillers + 1);
      switch (rng.Below(4)) {
        case 0: emit(t, "heartbeat seq=" + std::to_string(rng.Below(100000))); break;
        case 1:
          emit(t, "request " + HexToken(rng, 10) + " served in " +
                      std::to_string(rng.Below(50)) + "ms");
          break;
        case 2:
          emit(t, "session " + HexToken(rng, 8) + "-" + HexToken(rng, 4) + "-" +
                      HexToken(rng, 4) + "-" + HexToken(rng, 4) + "-" +
                      HexToken(rng, 12) + " idle");
          break;
        default:
          // Present in this log only.
          emit(t, "gc note " + Letters(rng, 8));
          break;
      }
    }
    emit(cp_ms[static_cast<size_t>(j)],
         "stage " + CheckpointName(j) + " loaded " + std::to_string(rng.Below(50000)) +
             " keys in " + std::to_string(rng.Below(90)) + "." +
             std::to_string(rng.Below(10)) + " ms");
    prev = cp_ms[static_cast<size_t>(j)];
  }
  emit(end_ms, "shutdown complete");
  return out;
}

struct PowerStep {
  double t0_ms;
  double watts;
};

// Cumulative joules from t = 0 for a piecewise-constant profile; the first
// step extends backwards for t < 0.
double CumulativeJ(const std::vector<PowerStep>& steps, double t) {
  if (t <= steps.front().t0_ms) return steps.front().watts * (t - steps.front().t0_ms) / 1000;
  double e = 0;
  for (size_t i = 0; i < steps.size(); ++i) {
    const double lo = steps[i].t0_ms;
    const double hi = i + 1 < steps.size() ? steps[i + 1].t0_ms : t;
    if (t <= lo) break;
    e += steps[i].watts * (std::min(t, hi) - lo) / 1000;
  }
  return e;
}

void WriteRun(const fs::path& runs_dir, int order, const std::string& label,
              int rep, bool hot, const std::vector<double>& nominal,
              SeededRng& rng) {
  const double scale = 1 + 0.003 * (2 * rng.Unit() - 1);
  const std::vector<double> cp = WarpCheckpoints(nominal, scale, 3, rng);
  const double end_ms = std::round(kRunMs * scale);
  const int64_t start = kEpochBase + int64_t{order} * 20'000;

  const double base_w = 5.0 + 0.05 * (2 * rng.Unit() - 1);
  std::vector<PowerStep> steps = {{0, base_w + (hot ? 0.04 : 0)}};
  for (int j = 0; j < kCheckpoints; ++j) {
    const double extra = hot ? (InHotStretch(j) ? 1.3 : 0.04) : 0;
    steps.push_back({cp[static_cast<size_t>(j)], base_w + extra});
  }

  RunArtifacts run;
  run.variant_label = label;
  run.repetition_index = rep;
  run.run_order_index = order;
  run.start_epoch_ms = start;
  run.end_epoch_ms = start + std::llround(end_ms);
  run.sampler_origin_epoch_ms = start - kSamplerLeadMs;
  run.log_path = "log.txt";
  run.samples.domain_id = std::string(SyntheticBackend::kDomainId);
  run.samples.counter_range_uj = SyntheticBackend::kDefaultRangeUj;
  // The first run in order starts just below the wrap point.
  const uint64_t range = SyntheticBackend::kDefaultRangeUj;
  const uint64_t offset = order == 0 ? range - 2'000'000 : rng.Below(range / 2);
  for (int64_t k = 1;; ++k) {
    const int64_t t_sampler = k * kSampleIntervalMs;
    const double t_run = static_cast<double>(t_sampler - kSamplerLeadMs);
    const double j = CumulativeJ(steps, t_run) + base_w * kSamplerLeadMs / 1000;
    run.samples.readings.push_back(
        {t_sampler, (offset + static_cast<uint64_t>(std::llround(j * 1e6))) % range,
         run.samples.domain_id});
    if (t_run > end_ms) break;
  }

  const fs::path dir = runs_dir / RunDirName(order, label, rep);
  fs::create_directories(dir);
  util::WriteFile(dir / "log.txt", MakeLog(start, end_ms, cp, rng));
  util::WriteFile(dir / "samples.csv", SeriesToCsv(run.samples));
  util::WriteFile(dir / "meta.json", RunMetaToJson(run));
}

std::string MakeTrace(const std::vector<double>& cp_ms, double end_ms,
                      const std::string& hot_function, SeededRng& rng) {
  struct Weighted {
    const char* name;
    double weight;
  };
  const std::vector<Weighted> cold = {{"write", 0.6}, {"read", 0.25}, {"malloc", 0.15}};
  const std::vector<Weighted> hot = {{"", 0.6}, {"write", 0.3}, {"read", 0.1}};
  auto pick = [&](const std::vector<Weighted>& table) {
    double u = rng.Unit();
    for (const Weighted& w : table) {
      if (u < w.weight) return std::string(*w.name ? w.name : hot_function.c_str());
      u -= w.weight;
    }
    return std::string(table.back().name);
  };
  auto in_hot = [&](double t) {
    for (const auto& [first, last] : kHotStretches)
      if (t >= cp_ms[static_cast<size_t>(first)] && t < cp_ms[static_cast<size_t>(last)])
        return true;
    return false;
  };

  constexpr int64_t kOriginUs = 3'000'000;
  const int64_t end_us = std::llround(end_ms * 1000);
  std::string out = "{\"traceEvents\":[\n";
  bool first = true;
  auto add = [&](const json& ev) {
    out += (first ? "" : ",\n") + ev.dump();
    first = false;
  };
  int64_t t = 0;
  while (t < end_us) {
    const std::string fn = pick(in_hot(static_cast<double>(t) / 1000) ? hot : cold);
    const int64_t dur = std::min<int64_t>(2000 + rng.Below(10000), end_us - t);
    if (fn == "malloc") {
      add({{"name", fn}, {"ph", "B"}, {"ts", kOriginUs + t}, {"pid", 1}, {"tid", 1}});
      add({{"name", fn}, {"ph", "E"}, {"ts", kOriginUs + t + dur}, {"pid", 1}, {"tid", 1}});
    } else {
      add({{"name", fn}, {"ph", "X"}, {"ts", kOriginUs + t}, {"dur", dur},
           {"pid", 1}, {"tid", 1}});
    }
    t += dur;
  }
  out += "\n]}\n";
  return out;
}

}  // namespace

void GenerateReplayFixture(const fs::path& dir, const FixtureOptions& options) {
  if (options.repetitions < 1)
    throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  SeededRng rng(options.seed);
  const std::vector<double> nominal = NominalCheckpoints(rng);

  const std::string baseline = "glibc";
  const std::string subject = "musl";
  ExperimentPlan plan;
  plan.variants = {{baseline, {"true"}, {}, "", {}}, {subject, {"true"}, {}, "", {}}};
  plan.repetitions = options.repetitions;
  plan.shuffle_seed = options.seed;

  fs::remove_all(dir);
  fs::create_directories(dir / "runs");
  const std::vector<ScheduleEntry> order = Schedule(plan);
  for (size_t i = 0; i < order.size(); ++i) {
    const bool hot = order[i].variant_label == subject && !options.identical_variants;
    WriteRun(dir / "runs", static_cast<int>(i), order[i].variant_label,
             order[i].repetition_index, hot, nominal, rng);
  }

  // Traced run of the subject: slower under the tracer, same progress.
  const std::vector<double> traced_cp =
      WarpCheckpoints(nominal, kTraceSlowdown, 10, rng);
  const double traced_end = std::round(kRunMs * kTraceSlowdown);
  const int64_t traced_start = kEpochBase + 1'000'000;
  fs::create_directories(dir / "traced");
  util::WriteFile(dir / "traced" / "log.txt",
                  MakeLog(traced_start, traced_end, traced_cp, rng));
  util::WriteFile(dir / "traced" / "meta.json",
                  json({{"variant_label", subject},
                        {"start_epoch_ms", traced_start},
                        {"end_epoch_ms", traced_start + std::llround(traced_end)}})
                          .dump(2) + "\n");
  util::WriteFile(dir / "trace.json",
                  MakeTrace(traced_cp, traced_end, options.hot_function, rng));

  ReplayConfig cfg;
  cfg.baseline_label = baseline;
  cfg.subject_label = subject;
  cfg.seed = options.seed;
  util::WriteFile(dir / "replay.json", ReplayConfigToJson(cfg));
}

}  // namespace ediag
