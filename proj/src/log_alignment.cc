#include "ediag/log_alignment.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "ediag/error.h"
#include "util.h"

namespace ediag {

using nlohmann::json;

namespace {

const std::regex& TimestampPattern() {
  static const std::regex re(
      R"(\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}(?::\d{2}(?:[.,]\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?)"
      R"(|\d{2}:\d{2}:\d{2}(?:[.,]\d+)?)");
  return re;
}

const std::regex& UuidPattern() {
  static const std::regex re(
      "[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-"
      "[0-9a-fA-F]{12}");
  return re;
}

const std::regex& HexPattern() {
  static const std::regex re(R"(\b(?:0[xX])?[0-9a-fA-F]{6,}\b)");
  return re;
}

bool LooksLikeHexId(std::string_view token) {
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X'))
    return true;
  bool digit = false;
  bool letter = false;
  for (char c : token) {
    if (std::isdigit(static_cast<unsigned char>(c)))
      digit = true;
    else
      letter = true;
  }
  return digit && letter;
}

std::string ReplaceAll(const std::string& in, const std::regex& re,
                       std::string_view replacement,
                       bool (*accept)(std::string_view) = nullptr) {
  std::string out;
  auto begin = std::sregex_iterator(in.begin(), in.end(), re);
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    const size_t pos = static_cast<size_t>(m.position(0));
    const std::string_view token(in.data() + pos, static_cast<size_t>(m.length(0)));
    if (accept && !accept(token)) continue;
    out.append(in, last, pos - last);
    out += replacement;
    last = pos + token.size();
  }
  out.append(in, last, std::string::npos);
  return out;
}

bool IsWordChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

std::string MaskNumbers(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    if (IsDigit(in[i]) && (i == 0 || !IsWordChar(in[i - 1]))) {
      size_t j = i;
      while (j < in.size() && IsDigit(in[j])) ++j;
      while (j + 1 < in.size() && (in[j] == '.' || in[j] == ',') &&
             IsDigit(in[j + 1])) {
        ++j;
        while (j < in.size() && IsDigit(in[j])) ++j;
      }
      out += "<NUM>";
      i = j;
    } else {
      out += in[i++];
    }
  }
  return out;
}

std::string CollapseSpaces(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char c : in) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

struct Pair {
  size_t a;
  size_t b;
  std::string masked;
  int occurrence;
};

// Longest chain of pairs strictly increasing in both a and b. Among chains
// of maximal length the one with the smallest total distance from the
// diagonal wins; the cost is symmetric in A and B. O(n log n) with a
// Fenwick tree over b keyed by (length, -cost).
std::vector<size_t> LongestConsistentChain(const std::vector<Pair>& pairs,
                                           size_t n_a, size_t n_b) {
  if (pairs.empty()) return {};
  std::vector<size_t> by_a(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) by_a[i] = i;
  std::sort(by_a.begin(), by_a.end(),
            [&](size_t x, size_t y) { return pairs[x].a < pairs[y].a; });

  struct Best {
    int len = 0;
    double cost = 0;
    int node = -1;  // index into by_a
  };
  auto better = [](const Best& x, const Best& y) {
    if (x.len != y.len) return x.len > y.len;
    if (x.cost != y.cost) return x.cost < y.cost;
    return x.node < y.node && x.node >= 0;
  };

  size_t max_b = 0;
  for (const Pair& p : pairs) max_b = std::max(max_b, p.b);
  std::vector<Best> tree(max_b + 2);
  auto query = [&](size_t b) {  // best over b' < b
    Best out;
    for (size_t i = b; i > 0; i -= i & (~i + 1))
      if (better(tree[i], out)) out = tree[i];
    return out;
  };
  auto update = [&](size_t b, const Best& v) {
    for (size_t i = b + 1; i < tree.size(); i += i & (~i + 1))
      if (better(v, tree[i])) tree[i] = v;
  };

  std::vector<int> parent(by_a.size(), -1);
  std::vector<Best> at(by_a.size());
  Best overall;
  for (size_t k = 0; k < by_a.size(); ++k) {
    const Pair& p = pairs[by_a[k]];
    const double cost =
        std::fabs(static_cast<double>(p.a) / static_cast<double>(n_a) -
                  static_cast<double>(p.b) / static_cast<double>(n_b));
    Best prev = query(p.b);
    Best here{prev.len + 1, prev.cost + cost, static_cast<int>(k)};
    parent[k] = prev.node;
    at[k] = here;
    update(p.b, here);
    if (better(here, overall)) overall = here;
  }
  std::vector<size_t> chain;
  for (int k = overall.node; k >= 0; k = parent[static_cast<size_t>(k)])
    chain.push_back(by_a[static_cast<size_t>(k)]);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace

std::string CleanLine(std::string_view raw) {
  std::string s(raw);
  s = ReplaceAll(s, TimestampPattern(), "<TS>");
  s = ReplaceAll(s, UuidPattern(), "<UUID>");
  s = ReplaceAll(s, HexPattern(), "<HEX>", &LooksLikeHexId);
  s = MaskNumbers(s);
  return CollapseSpaces(s);
}

CleanedLog ParseTimestampedLog(std::string_view text,
                               int64_t run_start_epoch_ms) {
  CleanedLog log;
  const auto lines = util::SplitLines(text);
  int64_t last_t = 0;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    int64_t epoch = 0;
    std::string_view body = line;
    bool stamped = false;
    if (!line.empty() && line.front() == '[') {
      const size_t close = line.find(']');
      if (close != std::string_view::npos &&
          util::ParseInt64(line.substr(1, close - 1), &epoch)) {
        stamped = true;
        body = line.substr(close + 1);
        if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      }
    }
    if (!stamped && i == 0) {
      throw Error(ErrorCode::kParseError,
                  "log line 1: missing [epoch_ms] prefix");
    }
    // Receipt order is time order; clamp any clock step backwards.
    const int64_t t =
        stamped ? std::max(last_t, epoch - run_start_epoch_ms) : last_t;
    last_t = t;
    log.lines.push_back({log.lines.size(), t, std::string(body), CleanLine(body)});
  }
  return log;
}

std::vector<Checkpoint> FindCheckpoints(const CleanedLog& log_a,
                                        const CleanedLog& log_b,
                                        const CheckpointConfig& config) {
  const size_t n_a = log_a.lines.size();
  const size_t n_b = log_b.lines.size();
  const size_t edge_a = static_cast<size_t>(config.edge_discard * static_cast<double>(n_a));
  const size_t edge_b = static_cast<size_t>(config.edge_discard * static_cast<double>(n_b));
  auto eligible = [](size_t idx, size_t n, size_t edge) {
    return idx >= edge && idx + edge < n;
  };

  std::unordered_map<std::string, std::vector<size_t>> occ_a;
  std::unordered_map<std::string, std::vector<size_t>> occ_b;
  for (const LogLine& l : log_a.lines)
    if (!l.masked.empty()) occ_a[l.masked].push_back(l.index);
  for (const LogLine& l : log_b.lines)
    if (!l.masked.empty()) occ_b[l.masked].push_back(l.index);

  // Candidate lines grouped by multiplicity, in a deterministic order.
  std::vector<std::vector<std::string>> by_multiplicity(
      static_cast<size_t>(std::max(config.max_multiplicity, 0)) + 1);
  for (const auto& [masked, positions] : occ_a) {
    const size_t k = positions.size();
    if (k < 1 || k > by_multiplicity.size() - 1) continue;
    auto it = occ_b.find(masked);
    if (it != occ_b.end() && it->second.size() == k)
      by_multiplicity[k].push_back(masked);
  }

  std::vector<Pair> pool;
  std::vector<size_t> chain;
  for (size_t k = 1; k < by_multiplicity.size(); ++k) {
    auto& names = by_multiplicity[k];
    std::sort(names.begin(), names.end());
    for (const std::string& masked : names) {
      const auto& pa = occ_a[masked];
      const auto& pb = occ_b[masked];
      for (size_t i = 0; i < k; ++i) {
        if (eligible(pa[i], n_a, edge_a) && eligible(pb[i], n_b, edge_b))
          pool.push_back({pa[i], pb[i], masked, static_cast<int>(i)});
      }
    }
    chain = LongestConsistentChain(pool, n_a, n_b);
    if (static_cast<int>(chain.size()) >= config.min_checkpoints) break;
  }
  if (chain.empty()) {
    throw Error(ErrorCode::kNoCheckpointsFound,
                "no log line of multiplicity <= " +
                    std::to_string(config.max_multiplicity) +
                    " is shared by both logs");
  }

  std::vector<Checkpoint> out;
  out.reserve(chain.size());
  for (size_t idx : chain) {
    const Pair& p = pool[idx];
    out.push_back({p.masked, p.occurrence, log_a.lines[p.a].t_ms,
                   log_b.lines[p.b].t_ms, p.a, p.b});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Checkpoint& x, const Checkpoint& y) {
                     return x.t_a_ms < y.t_a_ms;
                   });
  return out;
}

RegionSet BuildRegions(const std::vector<Checkpoint>& checkpoints, Span span_a,
                       Span span_b) {
  if (checkpoints.empty())
    throw Error(ErrorCode::kInvalidArgument, "build_regions needs a checkpoint");
  if (!(span_a.t1 > span_a.t0) || !(span_b.t1 > span_b.t0))
    throw Error(ErrorCode::kInvalidArgument, "run spans must have positive width");

  RegionSet set;
  std::vector<std::pair<double, double>> cuts{{span_a.t0, span_b.t0}};
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    const Checkpoint& cp = checkpoints[i];
    if (i > 0 && (cp.line_a_idx <= checkpoints[i - 1].line_a_idx ||
                  cp.line_b_idx <= checkpoints[i - 1].line_b_idx)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "checkpoints are not order-consistent");
    }
    const double a = static_cast<double>(cp.t_a_ms);
    const double b = static_cast<double>(cp.t_b_ms);
    if (a <= cuts.back().first || b <= cuts.back().second || a >= span_a.t1 ||
        b >= span_b.t1) {
      ++set.coalesced;
      continue;
    }
    cuts.push_back({a, b});
  }
  cuts.push_back({span_a.t1, span_b.t1});
  for (size_t i = 1; i < cuts.size(); ++i) {
    set.regions.push_back({{cuts[i - 1].first, cuts[i].first},
                           {cuts[i - 1].second, cuts[i].second},
                           static_cast<int>(i - 1)});
  }
  return set;
}

std::vector<Region> InvertRegions(const std::vector<Region>& regions) {
  std::vector<Region> out = regions;
  for (Region& r : out) std::swap(r.a, r.b);
  return out;
}

double MapTime(const std::vector<Region>& regions, double t_b) {
  if (regions.empty() || t_b < regions.front().b.t0 ||
      t_b > regions.back().b.t1) {
    throw Error(ErrorCode::kOutOfSpan,
                "time " + util::Sig6(t_b) + " ms is outside the aligned span");
  }
  auto it = std::upper_bound(
      regions.begin(), regions.end(), t_b,
      [](double t, const Region& r) { return t < r.b.t0; });
  const Region& r = *(it - 1);
  if (t_b == r.b.t0) return r.a.t0;
  if (t_b == r.b.t1) return r.a.t1;
  return r.a.t0 + (t_b - r.b.t0) * (r.a.t1 - r.a.t0) / (r.b.t1 - r.b.t0);
}

int64_t AlignedProfile::Total(const std::string& function) const {
  int64_t total = 0;
  for (const ProfileRegion& r : regions) {
    auto it = r.functions.find(function);
    if (it != r.functions.end()) total += it->second;
  }
  return total;
}

AlignedProfile AggregateByRegion(const std::vector<TraceEvent>& events,
                                 const std::vector<Region>& regions) {
  AlignedProfile profile;
  if (regions.empty()) return profile;
  std::vector<int64_t> bounds;  // regions.size() + 1 cut points in ns
  for (const Region& r : regions) bounds.push_back(std::llround(r.b.t0 * 1e6));
  bounds.push_back(std::llround(regions.back().b.t1 * 1e6));
  for (const Region& r : regions) {
    const size_t i = static_cast<size_t>(&r - regions.data());
    profile.regions.push_back({r.ordinal, r.a.t0, r.a.t1, bounds[i],
                               bounds[i + 1], {}});
  }

  const size_t last = regions.size() - 1;
  constexpr int64_t kMin = std::numeric_limits<int64_t>::min();
  constexpr int64_t kMax = std::numeric_limits<int64_t>::max();
  for (const TraceEvent& e : events) {
    if (e.duration_ns <= 0) continue;
    const int64_t s = e.t_start_ns;
    const int64_t end = e.t_end_ns();
    // First region whose upper cut lies beyond s.
    size_t i = static_cast<size_t>(
        std::upper_bound(bounds.begin() + 1, bounds.end() - 1, s) -
        (bounds.begin() + 1));
    for (; i <= last; ++i) {
      const int64_t lo = i == 0 ? kMin : bounds[i];
      const int64_t hi = i == last ? kMax : bounds[i + 1];
      if (lo >= end) break;
      const int64_t overlap = std::min(end, hi) - std::max(s, lo);
      if (overlap > 0) profile.regions[i].functions[e.function] += overlap;
    }
  }
  return profile;
}

AlignmentResult AlignRuns(const CleanedLog& energy_log, double energy_end_ms,
                          const CleanedLog& traced_log, double traced_end_ms,
                          const std::vector<TraceEvent>& trace_events,
                          const CheckpointConfig& config) {
  const std::vector<TraceEvent> events = RebaseToOrigin(trace_events);
  Span span_a{0, energy_end_ms};
  Span span_b{0, traced_end_ms};
  if (!energy_log.lines.empty())
    span_a.t1 = std::max(span_a.t1, static_cast<double>(energy_log.lines.back().t_ms));
  if (!traced_log.lines.empty())
    span_b.t1 = std::max(span_b.t1, static_cast<double>(traced_log.lines.back().t_ms));
  for (const TraceEvent& e : events)
    span_b.t1 = std::max(span_b.t1, static_cast<double>(e.t_end_ns()) / 1e6);

  AlignmentResult result;
  result.checkpoints = FindCheckpoints(energy_log, traced_log, config);
  result.regions = BuildRegions(result.checkpoints, span_a, span_b);
  result.profile = AggregateByRegion(events, result.regions.regions);
  for (const Region& r : result.regions.regions)
    result.max_region_width_ms = std::max(result.max_region_width_ms, r.a.t1 - r.a.t0);
  return result;
}

std::string ProfileToJson(const AlignedProfile& profile) {
  json doc;
  doc["regions"] = json::array();
  for (const ProfileRegion& r : profile.regions) {
    doc["regions"].push_back({{"ordinal", r.ordinal},
                              {"energy_t0_ms", r.energy_t0_ms},
                              {"energy_t1_ms", r.energy_t1_ms},
                              {"trace_t0_ns", r.trace_t0_ns},
                              {"trace_t1_ns", r.trace_t1_ns},
                              {"functions", r.functions}});
  }
  return doc.dump(2) + "\n";
}

AlignedProfile ProfileFromJson(std::string_view json_text) {
  AlignedProfile profile;
  try {
    const json doc = json::parse(json_text);
    for (const json& r : doc.at("regions")) {
      ProfileRegion region;
      region.ordinal = r.at("ordinal").get<int>();
      region.energy_t0_ms = r.at("energy_t0_ms").get<double>();
      region.energy_t1_ms = r.at("energy_t1_ms").get<double>();
      region.trace_t0_ns = r.value("trace_t0_ns", int64_t{0});
      region.trace_t1_ns = r.value("trace_t1_ns", int64_t{0});
      region.functions = r.at("functions").get<std::map<std::string, int64_t>>();
      profile.regions.push_back(std::move(region));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, std::string("profile: ") + e.what());
  }
  return profile;
}

}  // namespace ediag
