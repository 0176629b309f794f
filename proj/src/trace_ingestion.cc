#include "ediag/trace_ingestion.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "ediag/error.h"
#include "util.h"

namespace ediag {

using nlohmann::json;

namespace {

int64_t MicrosToNanos(const json& value) {
  if (value.is_number_integer()) return value.get<int64_t>() * 1000;
  return std::llround(value.get<double>() * 1000.0);
}

std::string ThreadKey(const json& event) {
  std::string key = event.contains("pid") ? event["pid"].dump() : "";
  key += '/';
  key += event.contains("tid") ? event["tid"].dump() : "";
  return key;
}

struct OpenSlice {
  std::string name;
  int64_t start_ns;
};

}  // namespace

double TraceReport::Share(const std::string& function) const {
  if (trace_total_ns <= 0) return 0;
  auto it = rows.find(function);
  if (it == rows.end()) return 0;
  return static_cast<double>(it->second.total_ns) /
         static_cast<double>(trace_total_ns);
}

Timeline ParseTimelineChrome(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, std::string("trace: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("traceEvents") ||
      !doc["traceEvents"].is_array()) {
    throw Error(ErrorCode::kMalformedJson, "trace: missing traceEvents array");
  }

  Timeline timeline;
  std::unordered_map<std::string, std::vector<OpenSlice>> stacks;
  try {
    for (const json& ev : doc["traceEvents"]) {
      if (!ev.is_object() || !ev.contains("ph")) continue;
      const std::string ph = ev["ph"].get<std::string>();
      if (ph == "X") {
        const int64_t dur = ev.contains("dur") ? MicrosToNanos(ev["dur"]) : 0;
        if (dur < 0) {
          throw Error(ErrorCode::kNegativeDuration,
                      "trace: negative dur for '" + ev.value("name", "") + "'");
        }
        timeline.events.push_back(
            {MicrosToNanos(ev.at("ts")), dur, ev.value("name", ""), {}});
      } else if (ph == "B") {
        stacks[ThreadKey(ev)].push_back(
            {ev.value("name", ""), MicrosToNanos(ev.at("ts"))});
      } else if (ph == "E") {
        auto& stack = stacks[ThreadKey(ev)];
        if (stack.empty()) {
          ++timeline.unmatched_end;
          continue;
        }
        OpenSlice open = std::move(stack.back());
        stack.pop_back();
        const int64_t end = MicrosToNanos(ev.at("ts"));
        if (end < open.start_ns) {
          throw Error(ErrorCode::kNegativeDuration,
                      "trace: '" + open.name + "' ends before it begins");
        }
        timeline.events.push_back({open.start_ns, end - open.start_ns,
                                   std::move(open.name),
                                   static_cast<int>(stack.size())});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, std::string("trace: ") + e.what());
  }
  for (const auto& [key, stack] : stacks)
    timeline.unmatched_begin += static_cast<int>(stack.size());

  std::stable_sort(timeline.events.begin(), timeline.events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     return a.t_start_ns < b.t_start_ns;
                   });
  return timeline;
}

std::vector<TraceEvent> RebaseToOrigin(std::vector<TraceEvent> events) {
  if (events.empty()) return events;
  int64_t origin = events.front().t_start_ns;
  for (const TraceEvent& e : events) origin = std::min(origin, e.t_start_ns);
  for (TraceEvent& e : events) e.t_start_ns -= origin;
  return events;
}

TraceReport ParseReportTsv(std::string_view text) {
  TraceReport report;
  const auto lines = util::SplitLines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.empty() || line.front() == '#') continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 =
        tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    int64_t total = 0;
    int64_t calls = 0;
    if (tab2 == std::string_view::npos || tab1 == 0 ||
        !util::ParseInt64(line.substr(tab1 + 1, tab2 - tab1 - 1), &total) ||
        !util::ParseInt64(line.substr(tab2 + 1), &calls) || total < 0 ||
        calls < 1) {
      throw Error(ErrorCode::kParseError,
                  "report line " + std::to_string(i + 1) +
                      ": expected function<TAB>total_ns<TAB>calls");
    }
    ReportRow& row = report.rows[std::string(line.substr(0, tab1))];
    row.total_ns += total;
    row.calls += calls;
    report.trace_total_ns += total;
  }
  return report;
}

std::string SerializeReportTsv(const TraceReport& report) {
  std::string out;
  for (const auto& [name, row] : report.rows) {
    out += name;
    out += '\t';
    out += std::to_string(row.total_ns);
    out += '\t';
    out += std::to_string(row.calls);
    out += '\n';
  }
  return out;
}

TraceReport BuildReport(const std::vector<TraceEvent>& events) {
  TraceReport report;
  for (const TraceEvent& e : events) {
    ReportRow& row = report.rows[e.function];
    row.total_ns += e.duration_ns;
    row.calls += 1;
    report.trace_total_ns += e.duration_ns;
  }
  return report;
}

std::vector<RankedRow> TopN(const TraceReport& report, size_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "top_n needs n >= 1");
  std::vector<RankedRow> rows;
  for (const auto& [name, row] : report.rows) rows.push_back({name, row});
  std::sort(rows.begin(), rows.end(), [](const RankedRow& a, const RankedRow& b) {
    if (a.row.total_ns != b.row.total_ns) return a.row.total_ns > b.row.total_ns;
    return a.function < b.function;
  });
  if (rows.size() > n) rows.resize(n);
  return rows;
}

}  // namespace ediag
