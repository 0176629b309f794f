#ifndef EDIAG_LOG_ALIGNMENT_H_
#define EDIAG_LOG_ALIGNMENT_H_

// Log-anchored alignment between an energy-measured run (domain A) and a
// traced run (domain B).
//
// Both runs print the same progress messages. After masking the parts of
// each line that vary between executions, lines of low multiplicity common
// to both logs become checkpoints; the stretches between consecutive
// checkpoints are treated as equivalent work, and time inside each stretch
// is mapped linearly. The traced run's function timeline is then binned
// into those stretches.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ediag/trace_ingestion.h"

namespace ediag {

struct LogLine {
  size_t index = 0;
  int64_t t_ms = 0;  // since run start
  std::string raw;
  std::string masked;
};

struct CleanedLog {
  std::vector<LogLine> lines;
};

// Masks volatile tokens, in this order:
//   ISO-8601 dates/times       -> <TS>
//   UUIDs                      -> <UUID>
//   hex runs of >= 6 characters containing both a digit and a letter,
//     optionally 0x-prefixed   -> <HEX>
//   decimal numbers with optional '.'/',' groups, not glued to a preceding
//     letter/digit/underscore  -> <NUM>   (a following unit or % is kept)
// then collapses whitespace runs to one space and trims.
std::string CleanLine(std::string_view raw);

// Parses `[<epoch_ms>] <text>` lines as written by the orchestrator. Times
// are re-based to `run_start_epoch_ms`. Lines without a prefix inherit the
// previous line's time. Throws kParseError if the first line has no prefix.
CleanedLog ParseTimestampedLog(std::string_view text,
                               int64_t run_start_epoch_ms);

struct Checkpoint {
  std::string masked_line;
  int occurrence_index = 0;
  int64_t t_a_ms = 0;
  int64_t t_b_ms = 0;
  size_t line_a_idx = 0;
  size_t line_b_idx = 0;

  bool operator==(const Checkpoint&) const = default;
};

struct CheckpointConfig {
  int max_multiplicity = 4;
  double edge_discard = 0.05;
  int min_checkpoints = 10;
};

// For k = 1..max_multiplicity, adds every masked line occurring exactly k
// times in both logs, pairing the i-th occurrences. Pairs with either line
// in the first or last edge_discard fraction of its log are dropped. The
// pool is reduced to the longest chain increasing in both line indices
// (ties: the chain closest to the diagonal of relative log position), and
// the search stops at the first k whose chain reaches min_checkpoints.
// Result ordered by t_a_ms. Throws kNoCheckpointsFound.
std::vector<Checkpoint> FindCheckpoints(const CleanedLog& log_a,
                                        const CleanedLog& log_b,
                                        const CheckpointConfig& config = {});

struct Span {
  double t0 = 0;
  double t1 = 0;
};

struct Region {
  Span a;
  Span b;
  int ordinal = 0;
};

struct RegionSet {
  std::vector<Region> regions;
  // Checkpoints dropped because they shared a timestamp with a neighbour
  // (or a span edge) in either domain.
  int coalesced = 0;
};

// [start, cp1), [cp1, cp2), ..., [cpN, end) in both domains.
// Throws kInvalidArgument for an empty or out-of-order checkpoint list.
RegionSet BuildRegions(const std::vector<Checkpoint>& checkpoints,
                       Span span_a, Span span_b);

// Swaps the A and B intervals of every region.
std::vector<Region> InvertRegions(const std::vector<Region>& regions);

// Piecewise-linear B -> A map. Throws kOutOfSpan.
double MapTime(const std::vector<Region>& regions, double t_b);

struct ProfileRegion {
  int ordinal = 0;
  double energy_t0_ms = 0;
  double energy_t1_ms = 0;
  int64_t trace_t0_ns = 0;
  int64_t trace_t1_ns = 0;
  std::map<std::string, int64_t> functions;  // total ns
};

struct AlignedProfile {
  std::vector<ProfileRegion> regions;

  int64_t Total(const std::string& function) const;
};

// Region boundaries in trace time (B domain, ms) become integer ns, assuming
// the trace origin coincides with the traced run's start. Each event's
// duration is split across regions in proportion to its overlap; parts
// before the first or after the last region are credited to that edge
// region.
AlignedProfile AggregateByRegion(const std::vector<TraceEvent>& events,
                                 const std::vector<Region>& regions);

struct AlignmentResult {
  std::vector<Checkpoint> checkpoints;
  RegionSet regions;
  AlignedProfile profile;
  double max_region_width_ms = 0;  // in the energy domain
};

// End-to-end: energy-run log (A), traced-run log (B), traced-run timeline.
// Spans run from 0 to the later of the last log line and `end_ms`; the B
// span also covers the last trace event.
AlignmentResult AlignRuns(const CleanedLog& energy_log, double energy_end_ms,
                          const CleanedLog& traced_log, double traced_end_ms,
                          const std::vector<TraceEvent>& trace_events,
                          const CheckpointConfig& config = {});

// {"regions":[{"ordinal","energy_t0_ms","energy_t1_ms","functions":{...}}]}
// plus trace_t0_ns/trace_t1_ns per region.
std::string ProfileToJson(const AlignedProfile& profile);
AlignedProfile ProfileFromJson(std::string_view json_text);

}  // namespace ediag

#endif  // EDIAG_LOG_ALIGNMENT_H_
