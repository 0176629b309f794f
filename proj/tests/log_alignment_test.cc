#include "ediag/log_alignment.h"

#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "ediag/error.h"
#include "support/oracles.h"

namespace ediag {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no ediag::Error thrown";
  return ErrorCode::kInvalidArgument;
}

// Lines "[start + t] text" at the given relative times.
std::string MakeLog(const std::vector<std::pair<int64_t, std::string>>& lines,
                    int64_t start = 1'000'000) {
  std::string out;
  for (const auto& [t, text] : lines)
    out += "[" + std::to_string(start + t) + "] " + text + "\n";
  return out;
}

Checkpoint Cp(int64_t a, int64_t b, size_t ia, size_t ib) {
  return {"x", 0, a, b, ia, ib};
}

TEST(CleanLineTest, Numbers) {
  EXPECT_EQ(CleanLine("10000 requests completed in 0.11 seconds"),
            "<NUM> requests completed in <NUM> seconds");
}

TEST(CleanLineTest, NothingVolatile) {
  EXPECT_EQ(CleanLine("====== LRANGE (first elements) ======"),
            "====== LRANGE (first elements) ======");
}

TEST(CleanLineTest, Empty) { EXPECT_EQ(CleanLine(""), ""); }

TEST(CleanLineTest, TimestampsUuidsAndHex) {
  EXPECT_EQ(CleanLine("2024-03-01T12:00:05.123Z server up"), "<TS> server up");
  EXPECT_EQ(CleanLine("session 123e4567-e89b-12d3-a456-426614174000 opened"),
            "session <UUID> opened");
  EXPECT_EQ(CleanLine("object at 0x7ffd5a2b"), "object at <HEX>");
  EXPECT_EQ(CleanLine("commit deadbeef12 applied"), "commit <HEX> applied");
}

TEST(CleanLineTest, KeepsWordsAndUnits) {
  // Pure-letter words are not hex ids, digits glued to a word stay.
  EXPECT_EQ(CleanLine("facade added to cafe"), "facade added to cafe");
  EXPECT_EQ(CleanLine("worker_12 used 45% of 300MB"), "worker_12 used <NUM>% of <NUM>MB");
  EXPECT_EQ(CleanLine("  spaced   out\t line "), "spaced out line");
}

TEST(ParseTimestampedLogTest, RebasesAndInherits) {
  const CleanedLog log =
      ParseTimestampedLog("[1000500] first 1\ncontinued\n[1000700] second\n", 1'000'000);
  ASSERT_EQ(log.lines.size(), 3u);
  EXPECT_EQ(log.lines[0].t_ms, 500);
  EXPECT_EQ(log.lines[1].t_ms, 500);
  EXPECT_EQ(log.lines[2].t_ms, 700);
  EXPECT_EQ(log.lines[0].masked, "first <NUM>");
  EXPECT_EQ(log.lines[1].raw, "continued");
  EXPECT_EQ(log.lines[2].index, 2u);
}

TEST(ParseTimestampedLogTest, FirstLineNeedsStamp) {
  EXPECT_EQ(CodeOf([] { ParseTimestampedLog("no stamp\n", 0); }), ErrorCode::kParseError);
}

std::vector<std::pair<int64_t, std::string>> DistinctLines(int n, int64_t scale) {
  std::vector<std::pair<int64_t, std::string>> lines;
  for (int i = 0; i < n; ++i) {
    std::string word;
    for (int k = i; ; k /= 26) {
      word += static_cast<char>('a' + k % 26);
      if (k < 26) break;
    }
    lines.push_back({(i + 1) * 10 * scale, "step " + word + " done"});
  }
  return lines;
}

TEST(FindCheckpointsTest, IdenticalLogs) {
  const auto lines = DistinctLines(100, 1);
  const CleanedLog a = ParseTimestampedLog(MakeLog(lines), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(lines), 1'000'000);
  const auto cps = FindCheckpoints(a, b);
  // Five lines at each end fall in the edge zones.
  ASSERT_EQ(cps.size(), 90u);
  for (const Checkpoint& cp : cps) {
    EXPECT_EQ(cp.t_a_ms, cp.t_b_ms);
    EXPECT_EQ(cp.line_a_idx, cp.line_b_idx);
    EXPECT_EQ(cp.occurrence_index, 0);
  }
  EXPECT_EQ(cps.front().line_a_idx, 5u);
  EXPECT_EQ(cps.back().line_a_idx, 94u);
}

TEST(FindCheckpointsTest, TripledTimestamps) {
  const CleanedLog a = ParseTimestampedLog(MakeLog(DistinctLines(100, 1)), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(DistinctLines(100, 3)), 1'000'000);
  const auto cps = FindCheckpoints(a, b);
  ASSERT_EQ(cps.size(), 90u);
  for (const Checkpoint& cp : cps) {
    EXPECT_EQ(cp.t_b_ms, 3 * cp.t_a_ms);
    EXPECT_EQ(a.lines[cp.line_a_idx].masked, b.lines[cp.line_b_idx].masked);
  }
}

TEST(FindCheckpointsTest, CrossingPairIsBroken) {
  // No edge discard, so all ten anchor candidates are eligible.
  std::vector<std::pair<int64_t, std::string>> la, lb;
  const std::vector<std::string> anchors = {"a0", "a1", "a2", "a3", "X", "Y",
                                            "a4", "a5", "a6", "a7"};
  for (size_t i = 0; i < anchors.size(); ++i) la.push_back({int64_t(i) * 10, "at " + anchors[i]});
  lb = la;
  std::swap(lb[4].second, lb[5].second);  // Y before X in B
  const CleanedLog a = ParseTimestampedLog(MakeLog(la), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(lb), 1'000'000);
  const auto cps = FindCheckpoints(a, b, {4, 0.0, 10});
  EXPECT_EQ(cps.size(), 9u);
  std::set<std::string> kept;
  for (const Checkpoint& cp : cps) kept.insert(cp.masked_line);
  EXPECT_EQ(kept.count("at X") + kept.count("at Y"), 1u);
  for (size_t i = 1; i < cps.size(); ++i) {
    EXPECT_GT(cps[i].line_a_idx, cps[i - 1].line_a_idx);
    EXPECT_GT(cps[i].line_b_idx, cps[i - 1].line_b_idx);
  }
}

TEST(FindCheckpointsTest, RepeatedLinesPairByOccurrence) {
  std::vector<std::pair<int64_t, std::string>> lines;
  for (int i = 0; i < 4; ++i) {
    lines.push_back({i * 40, "flush begin"});
    lines.push_back({i * 40 + 20, "flush end"});
  }
  const CleanedLog a = ParseTimestampedLog(MakeLog(lines), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(lines), 1'000'000);
  const auto cps = FindCheckpoints(a, b, {4, 0.0, 10});
  ASSERT_EQ(cps.size(), 8u);
  for (const Checkpoint& cp : cps) EXPECT_EQ(cp.line_a_idx, cp.line_b_idx);
  EXPECT_EQ(cps[2].occurrence_index, 1);
}

TEST(FindCheckpointsTest, MultiplicityMustAgreeAndStayBounded) {
  std::vector<std::pair<int64_t, std::string>> la, lb;
  for (int i = 0; i < 5; ++i) la.push_back({i, "same"});
  for (int i = 0; i < 5; ++i) lb.push_back({i, "same"});
  la.push_back({10, "once"});
  lb.push_back({10, "once"});
  lb.push_back({11, "once"});
  const CleanedLog a = ParseTimestampedLog(MakeLog(la), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(lb), 1'000'000);
  EXPECT_EQ(CodeOf([&] { FindCheckpoints(a, b, {4, 0.0, 10}); }),
            ErrorCode::kNoCheckpointsFound);
}

TEST(FindCheckpointsTest, GeneratedPairsHaveNoWrongPairs) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = testing::GenerateLogPair(seed);
    const CleanedLog a = ParseTimestampedLog(g.text_a, g.start_a);
    const CleanedLog b = ParseTimestampedLog(g.text_b, g.start_b);
    for (const Checkpoint& cp : FindCheckpoints(a, b)) {
      EXPECT_GE(g.event_a[cp.line_a_idx], 0);
      EXPECT_EQ(g.event_a[cp.line_a_idx], g.event_b[cp.line_b_idx]);
    }
  }
}

TEST(BuildRegionsTest, OneCheckpoint) {
  const RegionSet set = BuildRegions({Cp(10, 100, 1, 1)}, {0, 20}, {0, 300});
  ASSERT_EQ(set.regions.size(), 2u);
  EXPECT_DOUBLE_EQ(set.regions[0].a.t0, 0);
  EXPECT_DOUBLE_EQ(set.regions[0].a.t1, 10);
  EXPECT_DOUBLE_EQ(set.regions[0].b.t1, 100);
  EXPECT_DOUBLE_EQ(set.regions[1].a.t0, 10);
  EXPECT_DOUBLE_EQ(set.regions[1].a.t1, 20);
  EXPECT_DOUBLE_EQ(set.regions[1].b.t0, 100);
  EXPECT_DOUBLE_EQ(set.regions[1].b.t1, 300);
  EXPECT_EQ(set.coalesced, 0);
}

TEST(BuildRegionsTest, ZeroWidthIsCoalesced) {
  const RegionSet set = BuildRegions({Cp(10, 100, 1, 1), Cp(10, 150, 2, 2), Cp(15, 200, 3, 3)},
                                     {0, 20}, {0, 300});
  EXPECT_EQ(set.regions.size(), 3u);
  EXPECT_EQ(set.coalesced, 1);
}

TEST(BuildRegionsTest, NineCheckpointsTileTenRegions) {
  std::vector<Checkpoint> cps;
  for (int i = 1; i <= 9; ++i) cps.push_back(Cp(i * 10, i * 25, size_t(i), size_t(i)));
  const RegionSet set = BuildRegions(cps, {0, 100}, {0, 250});
  ASSERT_EQ(set.regions.size(), 10u);
  EXPECT_DOUBLE_EQ(set.regions.front().a.t0, 0);
  EXPECT_DOUBLE_EQ(set.regions.back().a.t1, 100);
  EXPECT_DOUBLE_EQ(set.regions.back().b.t1, 250);
  for (size_t i = 1; i < set.regions.size(); ++i) {
    EXPECT_DOUBLE_EQ(set.regions[i].a.t0, set.regions[i - 1].a.t1);
    EXPECT_DOUBLE_EQ(set.regions[i].b.t0, set.regions[i - 1].b.t1);
    EXPECT_EQ(set.regions[i].ordinal, static_cast<int>(i));
  }
}

TEST(BuildRegionsTest, Errors) {
  EXPECT_EQ(CodeOf([] { BuildRegions({}, {0, 1}, {0, 1}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] { BuildRegions({Cp(5, 5, 2, 2), Cp(6, 6, 1, 3)}, {0, 10}, {0, 10}); }),
            ErrorCode::kInvalidArgument);
}

TEST(MapTimeTest, LinearInsideRegion) {
  const std::vector<Region> regions = {{{0, 100}, {0, 1000}, 0},
                                       {{100, 200}, {1000, 3000}, 1}};
  EXPECT_DOUBLE_EQ(MapTime(regions, 2000), 150);
  EXPECT_DOUBLE_EQ(MapTime(regions, 1000), 100);
  EXPECT_DOUBLE_EQ(MapTime(regions, 3000), 200);
  EXPECT_EQ(CodeOf([&] { MapTime(regions, 3000.5); }), ErrorCode::kOutOfSpan);
  EXPECT_EQ(CodeOf([&] { MapTime(regions, -1); }), ErrorCode::kOutOfSpan);
}

TEST(MapTimeTest, CheckpointMapsExactly) {
  const RegionSet set = BuildRegions({Cp(37, 91, 1, 1), Cp(55, 140, 2, 2)}, {0, 80}, {0, 200});
  EXPECT_DOUBLE_EQ(MapTime(set.regions, 91), 37);
  EXPECT_DOUBLE_EQ(MapTime(set.regions, 140), 55);
}

TEST(MapTimeTest, RoundTripOnGeneratedWarp) {
  const auto g = testing::GenerateLogPair(3);
  const CleanedLog a = ParseTimestampedLog(g.text_a, g.start_a);
  const CleanedLog b = ParseTimestampedLog(g.text_b, g.start_b);
  const RegionSet set = BuildRegions(FindCheckpoints(a, b), {0, g.end_a_ms}, {0, g.end_b_ms});
  const auto inverse = InvertRegions(set.regions);
  testing::TestRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.Real(0, g.end_b_ms);
    EXPECT_NEAR(MapTime(inverse, MapTime(set.regions, t)), t, 1e-6);
  }
}

std::vector<Region> RegionsAtNs(const std::vector<int64_t>& cuts_ns) {
  std::vector<Region> regions;
  for (size_t i = 0; i + 1 < cuts_ns.size(); ++i) {
    const Span s{static_cast<double>(cuts_ns[i]) / 1e6, static_cast<double>(cuts_ns[i + 1]) / 1e6};
    regions.push_back({s, s, static_cast<int>(i)});
  }
  return regions;
}

TEST(AggregateByRegionTest, EventInsideOneRegion) {
  const auto profile = AggregateByRegion({{10, 20, "f", {}}}, RegionsAtNs({0, 100, 200}));
  ASSERT_EQ(profile.regions.size(), 2u);
  EXPECT_EQ(profile.regions[0].functions.at("f"), 20);
  EXPECT_TRUE(profile.regions[1].functions.empty());
}

TEST(AggregateByRegionTest, SplitAtBoundary) {
  const auto profile = AggregateByRegion({{90, 20, "f", {}}}, RegionsAtNs({0, 100, 200}));
  EXPECT_EQ(profile.regions[0].functions.at("f"), 10);
  EXPECT_EQ(profile.regions[1].functions.at("f"), 10);
}

TEST(AggregateByRegionTest, OutsidePartsGoToEdgeRegions) {
  const auto profile = AggregateByRegion({{-50, 100, "f", {}}, {180, 100, "g", {}}},
                                         RegionsAtNs({0, 100, 200}));
  EXPECT_EQ(profile.regions[0].functions.at("f"), 100);
  EXPECT_EQ(profile.regions[1].functions.at("g"), 100);
  EXPECT_EQ(profile.Total("f"), 100);
}

TEST(AggregateByRegionTest, MatchesPerNanosecondBinning) {
  testing::TestRng rng(11);
  const char* names[] = {"a", "b", "c"};
  std::vector<TraceEvent> events;
  for (int i = 0; i < 500; ++i)
    events.push_back({rng.Int(0, 10'000), rng.Int(0, 300), names[rng.Int(0, 2)], {}});
  std::vector<int64_t> cuts{0};
  while (cuts.back() < 10'000) cuts.push_back(cuts.back() + rng.Int(1, 1500));
  const auto profile = AggregateByRegion(events, RegionsAtNs(cuts));
  const auto oracle = testing::PerNanosecondOracle(events, cuts);
  ASSERT_EQ(profile.regions.size(), oracle.size());
  for (size_t r = 0; r < oracle.size(); ++r) {
    for (const char* fn : names) {
      auto it = oracle[r].find(fn);
      const int64_t want = it == oracle[r].end() ? 0 : it->second;
      auto jt = profile.regions[r].functions.find(fn);
      const int64_t got = jt == profile.regions[r].functions.end() ? 0 : jt->second;
      EXPECT_NEAR(static_cast<double>(got), static_cast<double>(want), 1.0) << r << " " << fn;
    }
  }
}

TEST(AlignRunsTest, RebasesTraceAndCoversSpans) {
  std::vector<std::pair<int64_t, std::string>> la, lb;
  for (int i = 0; i < 30; ++i) {
    la.push_back({i * 100, "unit " + std::string(1, char('a' + i % 26)) + std::string(1, char('a' + i / 26))});
    lb.push_back({i * 200, la.back().second});
  }
  const CleanedLog a = ParseTimestampedLog(MakeLog(la), 1'000'000);
  const CleanedLog b = ParseTimestampedLog(MakeLog(lb), 5'000'000);
  // Trace clock starts at an arbitrary offset.
  std::vector<TraceEvent> events = {{7'000'000'000, 6'000'000'000, "main", {}}};
  const AlignmentResult r = AlignRuns(a, 3000, b, 6000, events, {});
  EXPECT_FALSE(r.checkpoints.empty());
  EXPECT_EQ(r.profile.Total("main"), 6'000'000'000);
  EXPECT_DOUBLE_EQ(r.regions.regions.back().a.t1, 3000);
  EXPECT_DOUBLE_EQ(r.regions.regions.back().b.t1, 6000);
  EXPECT_GT(r.max_region_width_ms, 0);
}

TEST(ProfileJsonTest, RoundTrip) {
  AlignedProfile p;
  p.regions.push_back({0, 0, 12.5, 0, 25'000'000, {{"memcpy", 10}, {"write", 5}}});
  p.regions.push_back({1, 12.5, 30, 25'000'000, 60'000'000, {}});
  const AlignedProfile back = ProfileFromJson(ProfileToJson(p));
  ASSERT_EQ(back.regions.size(), 2u);
  EXPECT_EQ(back.regions[0].functions, p.regions[0].functions);
  EXPECT_DOUBLE_EQ(back.regions[1].energy_t1_ms, 30);
  EXPECT_EQ(back.regions[1].trace_t0_ns, 25'000'000);
  EXPECT_EQ(ProfileToJson(back), ProfileToJson(p));
}

}  // namespace
}  // namespace ediag
