#ifndef EDIAG_POWER_SAMPLING_H_
#define EDIAG_POWER_SAMPLING_H_

// Energy counter backends and the conversions from raw cumulative counters to
// power curves and integrated energy.
//
// A backend exposes one or more domains, each a cumulative microjoule counter
// that wraps at counter_range_uj. Readings carry a millisecond timestamp from
// the backend's clock; the sampler polls a backend at a fixed interval until
// its stop token fires.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

namespace ediag {

struct EnergyReading {
  int64_t t_ms = 0;
  uint64_t counter_uj = 0;
  std::string domain_id;

  bool operator==(const EnergyReading&) const = default;
};

struct SampleSeries {
  std::string domain_id;
  uint64_t counter_range_uj = 0;
  std::vector<EnergyReading> readings;
};

struct PowerPoint {
  double t_ms = 0;
  double power_w = 0;
};

struct CumulativePoint {
  int64_t t_ms = 0;
  uint64_t cumulative_uj = 0;

  bool operator==(const CumulativePoint&) const = default;
};

struct DomainInfo {
  std::string id;
  uint64_t counter_range_uj = 0;
};

// Milliseconds since an origin. Backends share a clock with whoever needs to
// relate readings to other events.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t NowMs() const = 0;
};

// std::chrono::steady_clock, re-based to the moment of construction.
class SteadyClock : public Clock {
 public:
  SteadyClock();
  int64_t NowMs() const override;

 private:
  int64_t origin_ns_;
};

// Test clock advanced by hand.
class ManualClock : public Clock {
 public:
  int64_t NowMs() const override { return now_ms_; }
  void Set(int64_t t_ms) { now_ms_ = t_ms; }

 private:
  int64_t now_ms_ = 0;
};

class EnergyBackend {
 public:
  virtual ~EnergyBackend() = default;

  virtual std::vector<DomainInfo> Domains() const = 0;

  // Throws Error{kDomainNotFound | kPermissionDenied | kBackendClosed |
  // kEndOfReplay}.
  virtual EnergyReading Read(std::string_view domain_id) = 0;

  uint64_t CounterRange(std::string_view domain_id) const;

  void Close() { open_ = false; }
  bool is_open() const { return open_; }

 protected:
  void CheckOpen() const;

 private:
  bool open_ = true;
};

// Linux powercap zones: every directory under `root` that has an `energy_uj`
// file. The domain id is the zone's `name` content followed by `@` and the
// zone directory name, e.g. "package-0@intel-rapl:0".
class SysfsBackend : public EnergyBackend {
 public:
  SysfsBackend(std::shared_ptr<const Clock> clock,
               std::filesystem::path root = "/sys/class/powercap");

  std::vector<DomainInfo> Domains() const override;
  EnergyReading Read(std::string_view domain_id) override;

 private:
  struct Zone {
    DomainInfo info;
    std::filesystem::path energy_file;
  };

  std::shared_ptr<const Clock> clock_;
  std::filesystem::path root_;
  std::vector<Zone> zones_;
};

// Replays a recorded `t_ms,counter_uj` CSV one row per read. Timestamps come
// from the file, not from a clock.
class ReplayBackend : public EnergyBackend {
 public:
  ReplayBackend(std::string domain_id, uint64_t counter_range_uj,
                std::vector<EnergyReading> rows);

  static ReplayBackend FromCsv(std::string domain_id,
                               uint64_t counter_range_uj,
                               std::string_view csv_text);

  std::vector<DomainInfo> Domains() const override;
  EnergyReading Read(std::string_view domain_id) override;

 private:
  DomainInfo info_;
  std::vector<EnergyReading> rows_;
  size_t next_ = 0;
};

// Counter computed from a cumulative-energy function of time. Used by tests
// and desk runs where no hardware counter is available.
class SyntheticBackend : public EnergyBackend {
 public:
  // Maps t_ms to cumulative joules consumed since t = 0.
  using EnergyFn = std::function<double(double t_ms)>;

  static constexpr uint64_t kDefaultRangeUj = 262'143'328'850;
  static constexpr std::string_view kDomainId = "synthetic";

  SyntheticBackend(std::shared_ptr<const Clock> clock, EnergyFn energy_j,
                   uint64_t counter_range_uj = kDefaultRangeUj);

  static std::unique_ptr<SyntheticBackend> ConstantPower(
      std::shared_ptr<const Clock> clock, double watts,
      uint64_t counter_range_uj = kDefaultRangeUj);

  std::vector<DomainInfo> Domains() const override;
  EnergyReading Read(std::string_view domain_id) override;

 private:
  std::shared_ptr<const Clock> clock_;
  EnergyFn energy_j_;
  uint64_t range_uj_;
};

EnergyReading ReadCounter(EnergyBackend& backend, std::string_view domain_id);

// Polls `backend` every `interval_ms` (first reading one interval after the
// call) until `stop` is requested. Once stopped, one last reading is taken at
// the next tick so the series covers the stop instant; a stop before the
// first tick yields an empty series. A replay backend running out of rows
// ends the series. `on_reading`, if set, runs after each reading is stored.
SampleSeries CollectSeries(
    EnergyBackend& backend, std::string_view domain_id, int64_t interval_ms,
    std::stop_token stop,
    const std::function<void(const EnergyReading&)>& on_reading = {});

// Cumulative energy with counter wraps undone. At most one wrap between
// consecutive readings is assumed.
std::vector<CumulativePoint> UnwrapCounter(const SampleSeries& series);

// One point per consecutive pair of readings, placed at the pair's midpoint.
std::vector<PowerPoint> ToPower(const SampleSeries& series);
std::vector<PowerPoint> ToPower(const std::vector<CumulativePoint>& cumulative);

// Trapezoidal integral in joules of the piecewise-linear power curve over
// [t_start_ms, t_end_ms]. The first and last points extend as constants to
// the window edges.
double IntegrateEnergy(const std::vector<PowerPoint>& points,
                       double t_start_ms, double t_end_ms);

// Linear interpolation of the curve at t, with the same edge extension as
// IntegrateEnergy.
double InterpolatePower(const std::vector<PowerPoint>& points, double t_ms);

// `t_ms,counter_uj` with LF line endings.
std::string SeriesToCsv(const SampleSeries& series);
SampleSeries SeriesFromCsv(std::string_view csv_text, std::string domain_id,
                           uint64_t counter_range_uj);

}  // namespace ediag

#endif  // EDIAG_POWER_SAMPLING_H_
