#include "ediag/orchestrator.h"

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <future>
#include <iostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "ediag/error.h"
#include "ediag/rng.h"
#include "subprocess.h"
#include "util.h"

namespace ediag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr size_t kMaxLogLineBytes = 1 << 20;

void SleepSeconds(double seconds) {
  if (seconds > 0)
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// Reads the child's merged stdout/stderr and writes `[<epoch_ms>] <line>`
// per line, stamped at receipt. Lines over 1 MiB are split.
void PumpLog(int fd, FILE* log) {
  std::string pending;
  auto emit = [&](std::string_view line) {
    std::fprintf(log, "[%lld] ", static_cast<long long>(util::EpochMsNow()));
    std::fwrite(line.data(), 1, line.size(), log);
    std::fputc('\n', log);
  };
  char buf[65536];
  while (true) {
    ssize_t n = read(fd, buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    pending.append(buf, static_cast<size_t>(n));
    size_t start = 0;
    while (true) {
      size_t nl = pending.find('\n', start);
      if (nl == std::string::npos) break;
      std::string_view line(pending.data() + start, nl - start);
      while (line.size() > kMaxLogLineBytes) {
        emit(line.substr(0, kMaxLogLineBytes));
        line.remove_prefix(kMaxLogLineBytes);
      }
      emit(line);
      start = nl + 1;
    }
    pending.erase(0, start);
    while (pending.size() > kMaxLogLineBytes) {
      emit(std::string_view(pending).substr(0, kMaxLogLineBytes));
      pending.erase(0, kMaxLogLineBytes);
    }
    std::fflush(log);
  }
  if (!pending.empty()) emit(pending);
  std::fflush(log);
}

std::string ResolveDomain(const EnergyBackend& backend,
                          const std::string& requested) {
  if (!requested.empty()) {
    backend.CounterRange(requested);  // throws kDomainNotFound
    return requested;
  }
  auto domains = backend.Domains();
  if (domains.empty())
    throw Error(ErrorCode::kDomainNotFound, "energy backend exposes no domains");
  return domains.front().id;
}

}  // namespace

std::string_view BackendKindName(BackendKind kind) {
  switch (kind) {
    case BackendKind::kSysfs: return "sysfs";
    case BackendKind::kReplay: return "replay";
    case BackendKind::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

BackendKind ParseBackendKind(std::string_view name) {
  if (name == "sysfs") return BackendKind::kSysfs;
  if (name == "replay") return BackendKind::kReplay;
  if (name == "synthetic") return BackendKind::kSynthetic;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown backend '" + std::string(name) +
                  "' (expected sysfs|replay|synthetic)");
}

void ValidatePlan(const ExperimentPlan& plan) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "invalid plan: " + msg);
  };
  if (plan.variants.empty()) fail("no variants");
  std::set<std::string> labels;
  for (const VariantSpec& v : plan.variants) {
    if (v.label.empty()) fail("empty variant label");
    if (!labels.insert(v.label).second) fail("duplicate label '" + v.label + "'");
    if (v.command.empty()) fail("variant '" + v.label + "' has no command");
  }
  if (plan.repetitions < 1) fail("repetitions must be >= 1");
  if (plan.rest_between_s < 0) fail("rest_between_s must be >= 0");
  if (plan.sample_interval_ms < 1) fail("sample_interval_ms must be >= 1");
  if (plan.warmup) {
    if (plan.warmup->command.empty()) fail("warmup has no command");
    if (plan.warmup->duration_s < 0) fail("warmup duration must be >= 0");
  }
}

ExperimentPlan PlanFromJson(std::string_view json_text,
                            std::optional<BackendKind> default_backend) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, std::string("plan: ") + e.what());
  }
  ExperimentPlan plan;
  try {
    for (const json& v : doc.at("variants")) {
      VariantSpec spec;
      spec.label = v.at("label").get<std::string>();
      spec.command = v.at("command").get<std::vector<std::string>>();
      if (v.contains("env"))
        spec.env = v["env"].get<std::map<std::string, std::string>>();
      spec.working_dir = v.value("working_dir", std::string());
      if (v.contains("cpu_affinity") && !v["cpu_affinity"].is_null())
        spec.cpu_affinity = v["cpu_affinity"].get<std::vector<int>>();
      plan.variants.push_back(std::move(spec));
    }
    plan.repetitions = doc.value("repetitions", plan.repetitions);
    if (doc.contains("warmup") && !doc["warmup"].is_null()) {
      WarmupSpec w;
      w.command = doc["warmup"].at("command").get<std::vector<std::string>>();
      w.duration_s = doc["warmup"].value("duration_s", w.duration_s);
      plan.warmup = std::move(w);
    }
    plan.rest_between_s = doc.value("rest_between_s", plan.rest_between_s);
    plan.sample_interval_ms =
        doc.value("sample_interval_ms", plan.sample_interval_ms);
    plan.shuffle_seed = doc.value("shuffle_seed", plan.shuffle_seed);
    if (doc.contains("backend"))
      plan.backend.kind = ParseBackendKind(doc["backend"].get<std::string>());
    else if (default_backend)
      plan.backend.kind = *default_backend;
    if (doc.contains("backend_options")) {
      const json& o = doc["backend_options"];
      plan.backend.synthetic_watts =
          o.value("synthetic_watts", plan.backend.synthetic_watts);
      plan.backend.sysfs_root = o.value("sysfs_root", plan.backend.sysfs_root);
      plan.backend.replay_csv = o.value("replay_csv", plan.backend.replay_csv);
      plan.backend.replay_range_uj =
          o.value("replay_range_uj", plan.backend.replay_range_uj);
    }
    plan.domain_id = doc.value("domain_id", plan.domain_id);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("plan: ") + e.what());
  }
  ValidatePlan(plan);
  return plan;
}

std::string PlanToJson(const ExperimentPlan& plan) {
  json doc;
  doc["variants"] = json::array();
  for (const VariantSpec& v : plan.variants) {
    json j = {{"label", v.label}, {"command", v.command}, {"env", v.env},
              {"working_dir", v.working_dir}};
    j["cpu_affinity"] = v.cpu_affinity ? json(*v.cpu_affinity) : json(nullptr);
    doc["variants"].push_back(j);
  }
  doc["repetitions"] = plan.repetitions;
  if (plan.warmup) {
    doc["warmup"] = {{"command", plan.warmup->command},
                     {"duration_s", plan.warmup->duration_s}};
  } else {
    doc["warmup"] = nullptr;
  }
  doc["rest_between_s"] = plan.rest_between_s;
  doc["sample_interval_ms"] = plan.sample_interval_ms;
  doc["shuffle_seed"] = plan.shuffle_seed;
  doc["backend"] = BackendKindName(plan.backend.kind);
  doc["backend_options"] = {{"synthetic_watts", plan.backend.synthetic_watts},
                            {"sysfs_root", plan.backend.sysfs_root},
                            {"replay_csv", plan.backend.replay_csv},
                            {"replay_range_uj", plan.backend.replay_range_uj}};
  doc["domain_id"] = plan.domain_id;
  return doc.dump(2) + "\n";
}

std::vector<ScheduleEntry> Schedule(const ExperimentPlan& plan) {
  std::vector<ScheduleEntry> order;
  order.reserve(plan.variants.size() * static_cast<size_t>(plan.repetitions));
  for (const VariantSpec& v : plan.variants)
    for (int rep = 0; rep < plan.repetitions; ++rep)
      order.push_back({v.label, rep});
  SeededRng rng(plan.shuffle_seed);
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = rng.Below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::unique_ptr<EnergyBackend> MakeBackend(const BackendConfig& config,
                                           std::shared_ptr<const Clock> clock) {
  switch (config.kind) {
    case BackendKind::kSysfs:
      return std::make_unique<SysfsBackend>(std::move(clock), config.sysfs_root);
    case BackendKind::kReplay:
      return std::make_unique<ReplayBackend>(ReplayBackend::FromCsv(
          "replay", config.replay_range_uj, util::ReadFile(config.replay_csv)));
    case BackendKind::kSynthetic:
      return SyntheticBackend::ConstantPower(std::move(clock),
                                             config.synthetic_watts);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown backend");
}

std::string RunDirName(int run_order_index, std::string_view label, int rep) {
  return std::to_string(run_order_index) + "_" + std::string(label) + "_" +
         std::to_string(rep);
}

RunArtifacts ExecuteRun(const ScheduleEntry& entry, int run_order_index,
                        const ExperimentPlan& plan, const fs::path& run_dir) {
  auto variant = std::find_if(
      plan.variants.begin(), plan.variants.end(),
      [&](const VariantSpec& v) { return v.label == entry.variant_label; });
  if (variant == plan.variants.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "schedule names unknown variant '" + entry.variant_label + "'");
  }

  fs::create_directories(run_dir);
  RunArtifacts run;
  run.variant_label = entry.variant_label;
  run.repetition_index = entry.repetition_index;
  run.run_order_index = run_order_index;
  run.log_path = run_dir / "log.txt";

  auto clock = std::make_shared<SteadyClock>();
  run.sampler_origin_epoch_ms = util::EpochMsNow();
  std::unique_ptr<EnergyBackend> backend = MakeBackend(plan.backend, clock);
  const std::string domain = ResolveDomain(*backend, plan.domain_id);

  // The child is launched only after the sampler's first reading so the
  // series brackets the whole run.
  std::promise<void> first_reading;
  std::future<void> first_ready = first_reading.get_future();
  bool first_signalled = false;
  SampleSeries series;
  std::exception_ptr sampler_error;
  std::jthread sampler([&](std::stop_token stop) {
    try {
      series = CollectSeries(*backend, domain, plan.sample_interval_ms, stop,
                             [&](const EnergyReading&) {
                               if (!first_signalled) {
                                 first_signalled = true;
                                 first_reading.set_value();
                               }
                             });
    } catch (...) {
      sampler_error = std::current_exception();
    }
    if (!first_signalled) first_reading.set_value();
  });
  first_ready.wait();
  if (sampler_error) {
    sampler.join();
    std::rethrow_exception(sampler_error);
  }

  FILE* log = std::fopen(run.log_path.c_str(), "wb");
  if (!log) {
    sampler.request_stop();
    throw Error(ErrorCode::kIoError, "cannot write " + run.log_path.string());
  }

  subprocess::SpawnOptions options;
  options.argv = variant->command;
  options.env = variant->env;
  options.working_dir = variant->working_dir;
  options.cpu_affinity = variant->cpu_affinity;

  run.start_epoch_ms = util::EpochMsNow();
  subprocess::Child child;
  try {
    child = subprocess::Spawn(options);
  } catch (...) {
    std::fclose(log);
    sampler.request_stop();
    throw;
  }
  for (const std::string& w : child.warnings) {
    std::cerr << "ediag: warning: " << w << "\n";
    run.warnings.push_back(w);
  }
  std::thread pump(PumpLog, child.output_fd, log);
  run.exit_code = subprocess::Wait(child.pid);
  // Background processes left in the group would keep the pipe open.
  kill(-child.pid, SIGTERM);
  pump.join();
  close(child.output_fd);
  std::fclose(log);
  run.end_epoch_ms = util::EpochMsNow();

  sampler.request_stop();
  sampler.join();
  if (sampler_error) std::rethrow_exception(sampler_error);
  run.samples = std::move(series);

  util::WriteFile(run_dir / "samples.csv", SeriesToCsv(run.samples));
  util::WriteFile(run_dir / "meta.json", RunMetaToJson(run));

  SleepSeconds(plan.rest_between_s);
  return run;
}

void RunWarmup(const ExperimentPlan& plan) {
  if (!plan.warmup) return;
  subprocess::SpawnOptions options;
  options.argv = plan.warmup->command;
  options.capture_output = false;
  subprocess::Child child = subprocess::Spawn(options);
  const auto deadline =
      std::chrono::steady_clock::now() +
      std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(plan.warmup->duration_s));
  while (std::chrono::steady_clock::now() < deadline) {
    if (subprocess::TryWait(child.pid)) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  subprocess::Terminate(child.pid, std::chrono::milliseconds(1000));
}

std::vector<RunArtifacts> RunPlan(const ExperimentPlan& plan,
                                  const fs::path& out_dir) {
  ValidatePlan(plan);
  fs::create_directories(out_dir);
  util::WriteFile(out_dir / "plan.json", PlanToJson(plan));
  RunWarmup(plan);
  std::vector<RunArtifacts> runs;
  const std::vector<ScheduleEntry> order = Schedule(plan);
  for (size_t i = 0; i < order.size(); ++i) {
    const int index = static_cast<int>(i);
    const ScheduleEntry& e = order[i];
    runs.push_back(ExecuteRun(
        e, index, plan,
        out_dir / RunDirName(index, e.variant_label, e.repetition_index)));
  }
  return runs;
}

std::string RunMetaToJson(const RunArtifacts& run) {
  json doc = {
      {"variant_label", run.variant_label},
      {"repetition_index", run.repetition_index},
      {"run_order_index", run.run_order_index},
      {"start_epoch_ms", run.start_epoch_ms},
      {"end_epoch_ms", run.end_epoch_ms},
      {"exit_code", run.exit_code},
      {"log_path", run.log_path.filename().string()},
      {"sampler_origin_epoch_ms", run.sampler_origin_epoch_ms},
      {"domain_id", run.samples.domain_id},
      {"counter_range_uj", run.samples.counter_range_uj},
      {"warnings", run.warnings},
  };
  return doc.dump(2) + "\n";
}

RunArtifacts LoadRun(const fs::path& run_dir) {
  const fs::path meta_path = run_dir / "meta.json";
  if (!fs::exists(meta_path))
    throw Error(ErrorCode::kIoError, "missing " + meta_path.string());
  json doc;
  try {
    doc = json::parse(util::ReadFile(meta_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, meta_path.string() + ": " + e.what());
  }
  RunArtifacts run;
  try {
    run.variant_label = doc.at("variant_label").get<std::string>();
    run.repetition_index = doc.at("repetition_index").get<int>();
    run.run_order_index = doc.at("run_order_index").get<int>();
    run.start_epoch_ms = doc.at("start_epoch_ms").get<int64_t>();
    run.end_epoch_ms = doc.at("end_epoch_ms").get<int64_t>();
    run.exit_code = doc.at("exit_code").get<int>();
    run.log_path = run_dir / doc.value("log_path", std::string("log.txt"));
    run.sampler_origin_epoch_ms = doc.at("sampler_origin_epoch_ms").get<int64_t>();
    run.warnings = doc.value("warnings", std::vector<std::string>{});
    run.samples = SeriesFromCsv(util::ReadFile(run_dir / "samples.csv"),
                                doc.at("domain_id").get<std::string>(),
                                doc.at("counter_range_uj").get<uint64_t>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, meta_path.string() + ": " + e.what());
  }
  if (run.end_epoch_ms < run.start_epoch_ms) {
    throw Error(ErrorCode::kInvalidArgument,
                meta_path.string() + ": run ends before it starts");
  }
  return run;
}

}  // namespace ediag
