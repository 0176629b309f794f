#include "ediag/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ediag/analysis_report.h"
#include "ediag/error.h"
#include "ediag/isolation_bench.h"
#include "ediag/log_alignment.h"
#include "ediag/orchestrator.h"
#include "ediag/pipeline.h"
#include "ediag/trace_ingestion.h"
#include "util.h"

namespace ediag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path))
    throw Error(ErrorCode::kIoError, "cannot read " + path);
}

void RequireDir(const std::string& path) {
  if (!fs::is_directory(path))
    throw Error(ErrorCode::kIoError, "no directory at " + path);
}

void EnsureParent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::optional<BackendKind> EnvBackend() {
  const char* v = std::getenv("EDIAG_BACKEND");
  if (!v || !*v) return std::nullopt;
  return ParseBackendKind(v);
}

struct MeasureArgs {
  std::string plan;
  std::string out;
  std::string backend;
  std::optional<uint64_t> seed;
  std::optional<int> repetitions;
  std::optional<double> rest_s;
};

int RunMeasure(const MeasureArgs& a, std::ostream& out) {
  RequireFile(a.plan);
  ExperimentPlan plan = PlanFromJson(util::ReadFile(a.plan), EnvBackend());
  if (!a.backend.empty()) plan.backend.kind = ParseBackendKind(a.backend);
  if (a.seed) plan.shuffle_seed = *a.seed;
  if (a.repetitions) plan.repetitions = *a.repetitions;
  if (a.rest_s) plan.rest_between_s = *a.rest_s;
  ValidatePlan(plan);
  const std::vector<RunArtifacts> runs = RunPlan(plan, a.out);
  for (const RunArtifacts& r : runs) {
    out << RunDirName(r.run_order_index, r.variant_label, r.repetition_index)
        << " exit=" << r.exit_code << " samples=" << r.samples.readings.size()
        << "\n";
  }
  return 0;
}

struct TraceArgs {
  std::string chrome;
  std::string tsv;
  std::string out;
  size_t top = 10;
};

int RunTrace(const TraceArgs& a, std::ostream& out, std::ostream& err) {
  TraceReport report;
  if (!a.chrome.empty()) {
    RequireFile(a.chrome);
    const Timeline tl = ParseTimelineChrome(util::ReadFile(a.chrome));
    if (tl.unmatched_begin || tl.unmatched_end) {
      err << "ediag: warning: " << tl.unmatched_begin << " unmatched begin, "
          << tl.unmatched_end << " unmatched end events ignored\n";
    }
    report = BuildReport(tl.events);
  } else {
    RequireFile(a.tsv);
    report = ParseReportTsv(util::ReadFile(a.tsv));
  }
  EnsureParent(a.out);
  util::WriteFile(a.out, SerializeReportTsv(report));
  for (const RankedRow& r : TopN(report, a.top)) {
    out << r.function << "\t" << r.row.total_ns << "\t" << r.row.calls << "\t"
        << util::Sig6(report.Share(r.function) * 100) << "%\n";
  }
  return 0;
}

struct AlignArgs {
  std::string log_a;
  std::string log_b;
  std::string trace;
  std::string out;
  CheckpointConfig checkpoints;
};

int RunAlign(const AlignArgs& a, std::ostream& out) {
  RequireFile(a.log_a);
  RequireFile(a.log_b);
  RequireFile(a.trace);
  const LoggedRun run_a = LoadLoggedRun(a.log_a);
  const LoggedRun run_b = LoadLoggedRun(a.log_b);
  const Timeline tl = ParseTimelineChrome(util::ReadFile(a.trace));
  const AlignmentResult result = AlignRuns(run_a.log, run_a.end_ms, run_b.log,
                                           run_b.end_ms, tl.events, a.checkpoints);
  EnsureParent(a.out);
  util::WriteFile(a.out, ProfileToJson(result.profile));
  out << "checkpoints=" << result.checkpoints.size()
      << " regions=" << result.regions.regions.size()
      << " coalesced=" << result.regions.coalesced
      << " max_region_width_ms=" << util::Sig6(result.max_region_width_ms) << "\n";
  return 0;
}

struct ReportArgs {
  std::string runs;
  std::string profile;
  std::string baseline;
  std::string subject;
  double gap_threshold_w = kDefaultGapThresholdW;
  double grid_step_ms = 100;
  std::string out;
};

int RunReport(const ReportArgs& a, std::ostream& out) {
  RequireDir(a.runs);
  RequireFile(a.profile);
  const AlignedProfile profile = ProfileFromJson(util::ReadFile(a.profile));
  ReportInputs in = AnalyzeRuns(LoadRunsDir(a.runs), profile,
                                {a.baseline, a.subject, a.gap_threshold_w, a.grid_step_ms});
  in.config_echo = {{"baseline", a.baseline},
                    {"subject", a.subject},
                    {"gap_threshold_w", a.gap_threshold_w},
                    {"grid_step_ms", a.grid_step_ms}};
  RenderReport(in, a.out);
  if (!in.ranking.rows.empty())
    out << "top suspect: " << in.ranking.rows.front().function << "\n";
  if (in.ranking.diagnostic) out << *in.ranking.diagnostic << "\n";
  return 0;
}

struct BenchArgs {
  std::string pattern;
  std::string scale = "desk";
  std::string out;
  std::optional<uint64_t> iterations;
  std::optional<int> repetitions;
  std::optional<int> workers;
  std::optional<size_t> buffer_bytes;
  std::optional<uint64_t> seed;
  bool energy = false;
  std::string backend;
};

int RunBench(const BenchArgs& a, std::ostream& out) {
  if (a.scale != "desk" && a.scale != "paper")
    throw Error(ErrorCode::kInvalidArgument, "scale must be desk or paper");
  std::vector<BenchPattern> patterns;
  if (a.pattern == "all") {
    patterns = {BenchPattern::kBulk, BenchPattern::kChunked,
                BenchPattern::kMem2MemElements, BenchPattern::kCachedElements};
  } else {
    patterns = {ParseBenchPattern(a.pattern)};
  }
  std::optional<BackendConfig> backend;
  if (a.energy) {
    backend.emplace();
    if (!a.backend.empty()) {
      backend->kind = ParseBackendKind(a.backend);
    } else if (auto env = EnvBackend()) {
      backend->kind = *env;
    }
  }
  std::string text;
  for (BenchPattern p : patterns) {
    BenchSpec spec = a.scale == "paper" ? FullSpec(p) : DeskSpec(p);
    if (a.iterations) spec.iterations = *a.iterations;
    if (a.repetitions) spec.repetitions = *a.repetitions;
    if (a.workers) spec.workers = *a.workers;
    if (a.buffer_bytes) spec.buffer_bytes = *a.buffer_bytes;
    if (a.seed) spec.seed = *a.seed;
    const BenchResult r = backend ? RunPatternMeasured(spec, *backend) : RunPattern(spec);
    if (!r.content_ok()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(BenchPatternName(p)) + ": destination checksum mismatch");
    }
    text += BenchResultToJson(r, spec);
  }
  if (a.out.empty() || a.out == "-") {
    out << text;
  } else {
    EnsureParent(a.out);
    util::WriteFile(a.out, text);
  }
  return 0;
}

struct ReplayArgs {
  std::string fixtures;
  std::string out;
  std::optional<double> gap_threshold_w;
  std::optional<double> grid_step_ms;
  std::optional<uint64_t> seed;
};

int RunReplay(const ReplayArgs& a, std::ostream& out) {
  const fs::path config_path = fs::path(a.fixtures) / "replay.json";
  if (!fs::exists(config_path))
    throw Error(ErrorCode::kMissingFixture, config_path.string() + " not found");
  ReplayConfig cfg = ReplayConfigFromJson(util::ReadFile(config_path));
  if (a.gap_threshold_w) cfg.gap_threshold_w = *a.gap_threshold_w;
  if (a.grid_step_ms) cfg.grid_step_ms = *a.grid_step_ms;
  if (a.seed) cfg.seed = *a.seed;
  const ReportInputs in = ReplayPipeline(a.fixtures, a.out, cfg);
  if (!in.ranking.rows.empty())
    out << "top suspect: " << in.ranking.rows.front().function << "\n";
  if (in.ranking.diagnostic) out << *in.ranking.diagnostic << "\n";
  return 0;
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"ediag: energy debugging toolkit", "ediag"};
  app.require_subcommand(1);

  MeasureArgs measure;
  CLI::App* m = app.add_subcommand("measure", "Run an experiment plan");
  m->add_option("--plan", measure.plan, "Plan JSON file")->required();
  m->add_option("--out", measure.out, "Output directory")->required();
  m->add_option("--backend", measure.backend, "sysfs|replay|synthetic");
  m->add_option("--seed", measure.seed, "Shuffle seed");
  m->add_option("--repetitions", measure.repetitions, "Repetitions per variant");
  m->add_option("--rest", measure.rest_s, "Rest between runs in seconds");

  TraceArgs trace;
  CLI::App* t = app.add_subcommand("trace", "Ingest a trace into a function report");
  auto* chrome = t->add_option("--chrome", trace.chrome, "Chrome trace-event JSON");
  auto* tsv = t->add_option("--tsv", trace.tsv, "function<TAB>total_ns<TAB>calls report");
  chrome->excludes(tsv);
  t->add_option("--out", trace.out, "Output TSV report")->required();
  t->add_option("--top", trace.top, "Rows to print")->check(CLI::PositiveNumber);

  AlignArgs align;
  CLI::App* al = app.add_subcommand("align", "Align a traced run to an energy run");
  al->add_option("--log-a", align.log_a, "Energy-run log")->required();
  al->add_option("--log-b", align.log_b, "Traced-run log")->required();
  al->add_option("--trace", align.trace, "Traced-run Chrome trace")->required();
  al->add_option("--out", align.out, "Output profile JSON")->required();
  al->add_option("--max-multiplicity", align.checkpoints.max_multiplicity)
      ->check(CLI::PositiveNumber);
  al->add_option("--edge-discard", align.checkpoints.edge_discard)
      ->check(CLI::Range(0.0, 0.5));
  al->add_option("--min-checkpoints", align.checkpoints.min_checkpoints)
      ->check(CLI::PositiveNumber);

  ReportArgs report;
  CLI::App* r = app.add_subcommand("report", "Statistics, bands and suspects");
  r->add_option("--runs", report.runs, "Directory of recorded runs")->required();
  r->add_option("--profile", report.profile, "Aligned profile JSON")->required();
  r->add_option("--baseline", report.baseline, "Baseline variant label")->required();
  r->add_option("--subject", report.subject, "Subject variant label")->required();
  r->add_option("--gap-threshold", report.gap_threshold_w, "Gap region threshold in W");
  r->add_option("--grid-step", report.grid_step_ms, "Band grid step in ms")
      ->check(CLI::PositiveNumber);
  r->add_option("--out", report.out, "Output directory")->required();

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Memory-copy isolation benchmarks");
  b->add_option("--pattern", bench.pattern,
                "bulk|chunked|mem2mem_elements|cached_elements|all")
      ->required();
  b->add_option("--scale", bench.scale, "desk|paper");
  b->add_option("--out", bench.out, "Output JSON file (default stdout)");
  b->add_option("--iterations", bench.iterations);
  b->add_option("--repetitions", bench.repetitions);
  b->add_option("--workers", bench.workers);
  b->add_option("--buffer-bytes", bench.buffer_bytes);
  b->add_option("--seed", bench.seed);
  b->add_flag("--energy", bench.energy, "Sample energy while running");
  b->add_option("--backend", bench.backend, "sysfs|replay|synthetic");

  ReplayArgs replay;
  CLI::App* rp = app.add_subcommand("replay", "Whole pipeline from recorded fixtures");
  rp->add_option("--fixtures", replay.fixtures, "Fixture directory")->required();
  rp->add_option("--out", replay.out, "Output directory")->required();
  rp->add_option("--gap-threshold", replay.gap_threshold_w);
  rp->add_option("--grid-step", replay.grid_step_ms)->check(CLI::PositiveNumber);
  rp->add_option("--seed", replay.seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (t->parsed() && trace.chrome.empty() && trace.tsv.empty())
      throw CLI::RequiredError("--chrome or --tsv");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (m->parsed()) return RunMeasure(measure, out);
    if (t->parsed()) return RunTrace(trace, out, err);
    if (al->parsed()) return RunAlign(align, out);
    if (r->parsed()) return RunReport(report, out);
    if (b->parsed()) return RunBench(bench, out);
    if (rp->parsed()) return RunReplay(replay, out);
  } catch (const Error& e) {
    err << "ediag: " << ErrorCodeName(e.code()) << ": " << OneLine(e.what()) << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "ediag: IoError: " << OneLine(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ediag
