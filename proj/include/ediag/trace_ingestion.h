#ifndef EDIAG_TRACE_INGESTION_H_
#define EDIAG_TRACE_INGESTION_H_

// Function-trace timelines (Chrome trace-event JSON, as exported by
// `uftrace dump --chrome` among others) and per-function summary reports.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ediag {

struct TraceEvent {
  int64_t t_start_ns = 0;
  int64_t duration_ns = 0;
  std::string function;
  std::optional<int> depth;

  int64_t t_end_ns() const { return t_start_ns + duration_ns; }
  bool operator==(const TraceEvent&) const = default;
};

struct Timeline {
  std::vector<TraceEvent> events;
  // `B` events still open at end of file, and `E` events with nothing open.
  int unmatched_begin = 0;
  int unmatched_end = 0;
};

struct ReportRow {
  int64_t total_ns = 0;
  int64_t calls = 0;

  bool operator==(const ReportRow&) const = default;
};

struct TraceReport {
  std::map<std::string, ReportRow> rows;
  int64_t trace_total_ns = 0;

  // total_ns / trace_total_ns; 0 for an empty trace or unknown function.
  double Share(const std::string& function) const;

  bool operator==(const TraceReport&) const = default;
};

// Complete events (ph "X") map directly, ts/dur microseconds to ns.
// Begin/end pairs (ph "B"/"E") are matched LIFO per (pid, tid); a matched
// pair's depth is the number of events still open beneath it on that thread.
// Other phases are ignored. Events are returned ordered by start time.
// Throws kMalformedJson, kNegativeDuration.
Timeline ParseTimelineChrome(std::string_view json_text);

// Shifts every event so the earliest start becomes t = 0.
std::vector<TraceEvent> RebaseToOrigin(std::vector<TraceEvent> events);

// `function<TAB>total_ns<TAB>calls` lines; `#` comments and blank lines are
// skipped; duplicate functions are summed. Throws kParseError with the line
// number.
TraceReport ParseReportTsv(std::string_view text);

// Canonical form: rows in function-name order, LF endings, no header.
std::string SerializeReportTsv(const TraceReport& report);

TraceReport BuildReport(const std::vector<TraceEvent>& events);

struct RankedRow {
  std::string function;
  ReportRow row;
};

// Sorted by total_ns descending, ties by function name ascending.
std::vector<RankedRow> TopN(const TraceReport& report, size_t n);

}  // namespace ediag

#endif  // EDIAG_TRACE_INGESTION_H_
