#include "ediag/power_sampling.h"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <thread>

#include "ediag/error.h"
#include "util.h"

namespace ediag {

namespace fs = std::filesystem;

namespace {

int64_t SteadyNowNs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Reads the first line of a small sysfs file. Returns errno on failure.
int ReadSysfsLine(const fs::path& path, std::string* out) {
  FILE* f = std::fopen(path.c_str(), "r");
  if (!f) return errno;
  char buf[256];
  int err = 0;
  if (std::fgets(buf, sizeof(buf), f)) {
    *out = buf;
    while (!out->empty() && (out->back() == '\n' || out->back() == ' '))
      out->pop_back();
  } else {
    err = std::ferror(f) ? errno : EIO;
  }
  std::fclose(f);
  return err;
}

}  // namespace

SteadyClock::SteadyClock() : origin_ns_(SteadyNowNs()) {}

int64_t SteadyClock::NowMs() const {
  return (SteadyNowNs() - origin_ns_) / 1'000'000;
}

uint64_t EnergyBackend::CounterRange(std::string_view domain_id) const {
  for (const DomainInfo& d : Domains())
    if (d.id == domain_id) return d.counter_range_uj;
  throw Error(ErrorCode::kDomainNotFound,
              "no energy domain '" + std::string(domain_id) + "'");
}

void EnergyBackend::CheckOpen() const {
  if (!open_) throw Error(ErrorCode::kBackendClosed, "energy backend is closed");
}

// --- sysfs -----------------------------------------------------------------

SysfsBackend::SysfsBackend(std::shared_ptr<const Clock> clock, fs::path root)
    : clock_(std::move(clock)), root_(std::move(root)) {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root_, ec))
    if (fs::exists(entry.path() / "energy_uj")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& dir : dirs) {
    std::string name = dir.filename().string();
    std::string zone_name;
    if (ReadSysfsLine(dir / "name", &zone_name) == 0 && !zone_name.empty())
      name = zone_name + "@" + dir.filename().string();
    uint64_t range = 0;
    std::string range_text;
    if (ReadSysfsLine(dir / "max_energy_range_uj", &range_text) != 0 ||
        !util::ParseUint64(range_text, &range) || range == 0) {
      continue;
    }
    zones_.push_back({{name, range}, dir / "energy_uj"});
  }
}

std::vector<DomainInfo> SysfsBackend::Domains() const {
  std::vector<DomainInfo> out;
  for (const Zone& z : zones_) out.push_back(z.info);
  return out;
}

EnergyReading SysfsBackend::Read(std::string_view domain_id) {
  CheckOpen();
  auto it = std::find_if(zones_.begin(), zones_.end(), [&](const Zone& z) {
    return z.info.id == domain_id;
  });
  if (it == zones_.end()) {
    throw Error(ErrorCode::kDomainNotFound,
                "no powercap zone '" + std::string(domain_id) + "' under " +
                    root_.string());
  }
  std::string text;
  int err = ReadSysfsLine(it->energy_file, &text);
  if (err == EACCES || err == EPERM) {
    throw Error(ErrorCode::kPermissionDenied,
                "cannot read " + it->energy_file.string() + ": " +
                    std::strerror(err));
  }
  uint64_t counter = 0;
  if (err != 0 || !util::ParseUint64(text, &counter)) {
    throw Error(ErrorCode::kDomainNotFound,
                "unreadable counter " + it->energy_file.string());
  }
  return {clock_->NowMs(), counter, it->info.id};
}

// --- replay ----------------------------------------------------------------

ReplayBackend::ReplayBackend(std::string domain_id, uint64_t counter_range_uj,
                             std::vector<EnergyReading> rows)
    : info_{std::move(domain_id), counter_range_uj}, rows_(std::move(rows)) {
  for (EnergyReading& r : rows_) r.domain_id = info_.id;
}

ReplayBackend ReplayBackend::FromCsv(std::string domain_id,
                                     uint64_t counter_range_uj,
                                     std::string_view csv_text) {
  SampleSeries series = SeriesFromCsv(csv_text, domain_id, counter_range_uj);
  return ReplayBackend(std::move(domain_id), counter_range_uj,
                       std::move(series.readings));
}

std::vector<DomainInfo> ReplayBackend::Domains() const { return {info_}; }

EnergyReading ReplayBackend::Read(std::string_view domain_id) {
  CheckOpen();
  if (domain_id != info_.id) {
    throw Error(ErrorCode::kDomainNotFound,
                "replay backend has no domain '" + std::string(domain_id) + "'");
  }
  if (next_ >= rows_.size())
    throw Error(ErrorCode::kEndOfReplay, "replay rows exhausted");
  return rows_[next_++];
}

// --- synthetic -------------------------------------------------------------

SyntheticBackend::SyntheticBackend(std::shared_ptr<const Clock> clock,
                                   EnergyFn energy_j, uint64_t counter_range_uj)
    : clock_(std::move(clock)),
      energy_j_(std::move(energy_j)),
      range_uj_(counter_range_uj) {}

std::unique_ptr<SyntheticBackend> SyntheticBackend::ConstantPower(
    std::shared_ptr<const Clock> clock, double watts,
    uint64_t counter_range_uj) {
  return std::make_unique<SyntheticBackend>(
      std::move(clock), [watts](double t_ms) { return watts * t_ms / 1000.0; },
      counter_range_uj);
}

std::vector<DomainInfo> SyntheticBackend::Domains() const {
  return {{std::string(kDomainId), range_uj_}};
}

EnergyReading SyntheticBackend::Read(std::string_view domain_id) {
  CheckOpen();
  if (domain_id != kDomainId) {
    throw Error(ErrorCode::kDomainNotFound,
                "synthetic backend has no domain '" + std::string(domain_id) +
                    "'");
  }
  const int64_t t = clock_->NowMs();
  const long long uj = std::llround(energy_j_(static_cast<double>(t)) * 1e6);
  const uint64_t total = uj > 0 ? static_cast<uint64_t>(uj) : 0;
  return {t, total % range_uj_, std::string(kDomainId)};
}

// --- sampling --------------------------------------------------------------

EnergyReading ReadCounter(EnergyBackend& backend, std::string_view domain_id) {
  return backend.Read(domain_id);
}

SampleSeries CollectSeries(
    EnergyBackend& backend, std::string_view domain_id, int64_t interval_ms,
    std::stop_token stop,
    const std::function<void(const EnergyReading&)>& on_reading) {
  if (interval_ms < 1)
    throw Error(ErrorCode::kInvalidArgument, "sample interval must be >= 1 ms");

  SampleSeries series;
  series.domain_id = std::string(domain_id);
  series.counter_range_uj = backend.CounterRange(domain_id);

  using clock = std::chrono::steady_clock;
  const auto origin = clock::now();
  const auto interval = std::chrono::milliseconds(interval_ms);
  std::mutex mu;
  std::condition_variable_any cv;

  // Returns false when the replay source is exhausted.
  auto take = [&]() {
    EnergyReading r;
    try {
      r = backend.Read(domain_id);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEndOfReplay) return false;
      throw;
    }
    if (!series.readings.empty() && r.t_ms <= series.readings.back().t_ms)
      return true;  // same millisecond as the previous tick
    series.readings.push_back(r);
    if (on_reading) on_reading(series.readings.back());
    return true;
  };

  int64_t tick = 1;
  while (true) {
    const auto deadline = origin + tick * interval;
    {
      std::unique_lock lock(mu);
      cv.wait_until(lock, stop, deadline, [] { return false; });
    }
    if (stop.stop_requested()) {
      if (series.readings.empty()) return series;
      std::this_thread::sleep_until(deadline);
      take();
      return series;
    }
    if (!take()) return series;
    // Skip ticks missed while reading.
    const auto elapsed = clock::now() - origin;
    tick = std::max<int64_t>(tick + 1, elapsed / interval + 1);
  }
}

std::vector<CumulativePoint> UnwrapCounter(const SampleSeries& series) {
  if (series.counter_range_uj == 0)
    throw Error(ErrorCode::kInvalidArgument, "counter range must be > 0");
  std::vector<CumulativePoint> out;
  out.reserve(series.readings.size());
  uint64_t wraps = 0;
  for (size_t i = 0; i < series.readings.size(); ++i) {
    const EnergyReading& r = series.readings[i];
    if (i > 0 && r.counter_uj < series.readings[i - 1].counter_uj) ++wraps;
    out.push_back({r.t_ms, r.counter_uj + wraps * series.counter_range_uj});
  }
  return out;
}

std::vector<PowerPoint> ToPower(const std::vector<CumulativePoint>& cumulative) {
  if (cumulative.size() < 2) {
    throw Error(ErrorCode::kInsufficientSamples,
                "need at least 2 readings to derive power");
  }
  std::vector<PowerPoint> out;
  out.reserve(cumulative.size() - 1);
  for (size_t i = 1; i < cumulative.size(); ++i) {
    const CumulativePoint& a = cumulative[i - 1];
    const CumulativePoint& b = cumulative[i];
    const double dt_ms = static_cast<double>(b.t_ms - a.t_ms);
    const double de_uj = static_cast<double>(b.cumulative_uj - a.cumulative_uj);
    // uJ per ms is mW.
    out.push_back({(static_cast<double>(a.t_ms) + static_cast<double>(b.t_ms)) / 2,
                   de_uj / dt_ms / 1000.0});
  }
  return out;
}

std::vector<PowerPoint> ToPower(const SampleSeries& series) {
  return ToPower(UnwrapCounter(series));
}

double InterpolatePower(const std::vector<PowerPoint>& points, double t_ms) {
  if (points.empty()) throw Error(ErrorCode::kEmptyCurve, "empty power curve");
  if (t_ms <= points.front().t_ms) return points.front().power_w;
  if (t_ms >= points.back().t_ms) return points.back().power_w;
  auto it = std::upper_bound(
      points.begin(), points.end(), t_ms,
      [](double t, const PowerPoint& p) { return t < p.t_ms; });
  const PowerPoint& hi = *it;
  const PowerPoint& lo = *(it - 1);
  const double f = (t_ms - lo.t_ms) / (hi.t_ms - lo.t_ms);
  return lo.power_w + f * (hi.power_w - lo.power_w);
}

double IntegrateEnergy(const std::vector<PowerPoint>& points,
                       double t_start_ms, double t_end_ms) {
  if (points.empty()) throw Error(ErrorCode::kEmptyCurve, "empty power curve");
  if (t_end_ms < t_start_ms) {
    throw Error(ErrorCode::kInvalidArgument,
                "integration window ends before it starts");
  }
  // Knots of the piecewise-linear curve inside the window, plus the window
  // edges; between consecutive knots the curve is linear.
  std::vector<double> knots{t_start_ms};
  for (const PowerPoint& p : points)
    if (p.t_ms > t_start_ms && p.t_ms < t_end_ms) knots.push_back(p.t_ms);
  knots.push_back(t_end_ms);

  double mw_ms = 0;  // W * ms
  for (size_t i = 1; i < knots.size(); ++i) {
    const double a = knots[i - 1];
    const double b = knots[i];
    mw_ms += (InterpolatePower(points, a) + InterpolatePower(points, b)) / 2 *
             (b - a);
  }
  return mw_ms / 1000.0;
}

// --- CSV -------------------------------------------------------------------

std::string SeriesToCsv(const SampleSeries& series) {
  std::string out = "t_ms,counter_uj\n";
  for (const EnergyReading& r : series.readings) {
    out += std::to_string(r.t_ms);
    out += ',';
    out += std::to_string(r.counter_uj);
    out += '\n';
  }
  return out;
}

SampleSeries SeriesFromCsv(std::string_view csv_text, std::string domain_id,
                           uint64_t counter_range_uj) {
  SampleSeries series{domain_id, counter_range_uj, {}};
  const auto lines = util::SplitLines(csv_text);
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (i == 0 && line == "t_ms,counter_uj") continue;
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    int64_t t = 0;
    uint64_t counter = 0;
    if (comma == std::string_view::npos ||
        !util::ParseInt64(line.substr(0, comma), &t) ||
        !util::ParseUint64(line.substr(comma + 1), &counter) || t < 0) {
      throw Error(ErrorCode::kParseError,
                  "samples csv line " + std::to_string(i + 1) + ": '" +
                      std::string(line) + "'");
    }
    if (counter_range_uj > 0 && counter >= counter_range_uj) {
      throw Error(ErrorCode::kParseError,
                  "samples csv line " + std::to_string(i + 1) +
                      ": counter exceeds the declared range");
    }
    if (!series.readings.empty() && t <= series.readings.back().t_ms) {
      throw Error(ErrorCode::kParseError,
                  "samples csv line " + std::to_string(i + 1) +
                      ": timestamps must increase");
    }
    series.readings.push_back({t, counter, domain_id});
  }
  return series;
}

}  // namespace ediag
