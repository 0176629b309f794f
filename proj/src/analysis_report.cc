#include "ediag/analysis_report.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "ediag/error.h"
#include "util.h"

namespace ediag {

namespace fs = std::filesystem;
using nlohmann::json;
using util::Round6;
using util::Sig6;

RunCurve CurveFromRun(const RunArtifacts& run) {
  RunCurve curve;
  curve.label = run.variant_label;
  curve.repetition_index = run.repetition_index;
  curve.duration_ms = static_cast<double>(run.end_epoch_ms - run.start_epoch_ms);
  curve.power = ToPower(run.samples);
  const double shift =
      static_cast<double>(run.sampler_origin_epoch_ms - run.start_epoch_ms);
  for (PowerPoint& p : curve.power) p.t_ms += shift;
  return curve;
}

double Quantile(std::vector<double> values, double p) {
  if (values.empty())
    throw Error(ErrorCode::kInvalidArgument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary Summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::kNoRuns, "no values to summarize");
  Summary s;
  s.count = values.size();
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.median = Quantile(values, 0.5);
  s.q25 = Quantile(values, 0.25);
  s.q75 = Quantile(values, 0.75);
  double m2 = 0;
  double m3 = 0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  if (values.size() > 1) s.std = std::sqrt(m2 / (n - 1));
  if (values.size() > 2 && m2 > 0) {
    const double g1 = (m3 / n) / std::pow(m2 / n, 1.5);
    s.skewness = g1 * std::sqrt(n * (n - 1)) / (n - 2);
  }
  return s;
}

bool VariantStats::symmetric() const { return std::fabs(energy.skewness) <= 1.0; }

VariantStats SummarizeVariant(const std::vector<RunCurve>& runs) {
  if (runs.empty()) throw Error(ErrorCode::kNoRuns, "variant has no runs");
  VariantStats stats;
  stats.label = runs.front().label;
  for (const RunCurve& r : runs) {
    stats.duration_s.push_back(r.duration_ms / 1000.0);
    stats.energy_j.push_back(IntegrateEnergy(r.power, 0, r.duration_ms));
  }
  stats.duration = Summarize(stats.duration_s);
  stats.energy = Summarize(stats.energy_j);
  return stats;
}

double EnergyDiffPct(double subject_j, double baseline_j) {
  if (baseline_j == 0)
    throw Error(ErrorCode::kZeroBaseline, "baseline energy is zero");
  return (subject_j - baseline_j) / baseline_j * 100.0;
}

std::vector<PowerPoint> PowerBand::MedianCurve() const {
  std::vector<PowerPoint> out;
  for (size_t i = 0; i < grid_t_ms.size(); ++i)
    out.push_back({grid_t_ms[i], median_w[i]});
  return out;
}

PowerBand ComputePowerBand(const std::vector<RunCurve>& runs,
                           double grid_step_ms) {
  if (runs.empty()) throw Error(ErrorCode::kNoRuns, "power band needs runs");
  if (!(grid_step_ms >= 1))
    throw Error(ErrorCode::kInvalidArgument, "grid step must be >= 1 ms");
  double shortest = std::numeric_limits<double>::infinity();
  for (const RunCurve& r : runs) shortest = std::min(shortest, r.duration_ms);
  if (shortest < grid_step_ms) {
    throw Error(ErrorCode::kNoOverlap,
                "shortest run (" + Sig6(shortest) +
                    " ms) is shorter than one grid step");
  }
  PowerBand band;
  band.label = runs.front().label;
  band.grid_step_ms = grid_step_ms;
  const size_t points = static_cast<size_t>(std::floor(shortest / grid_step_ms)) + 1;
  std::vector<double> column(runs.size());
  for (size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) * grid_step_ms;
    for (size_t r = 0; r < runs.size(); ++r)
      column[r] = InterpolatePower(runs[r].power, t);
    band.grid_t_ms.push_back(t);
    band.median_w.push_back(Quantile(column, 0.5));
    band.q25_w.push_back(Quantile(column, 0.25));
    band.q75_w.push_back(Quantile(column, 0.75));
  }
  return band;
}

namespace {

void CheckSameGrid(const PowerBand& a, const PowerBand& b) {
  if (a.grid_t_ms != b.grid_t_ms) {
    throw Error(ErrorCode::kGridMismatch,
                "bands '" + a.label + "' and '" + b.label +
                    "' are on different time grids");
  }
}

// Time average of a piecewise-linear curve over [t0, t1].
double MeanOver(const std::vector<PowerPoint>& curve, double t0, double t1) {
  return IntegrateEnergy(curve, t0, t1) * 1000.0 / (t1 - t0);
}

json SummaryJson(const Summary& s) {
  return {{"mean", Round6(s.mean)}, {"median", Round6(s.median)},
          {"std", Round6(s.std)},   {"min", Round6(s.min)},
          {"max", Round6(s.max)},   {"q25", Round6(s.q25)},
          {"q75", Round6(s.q75)},   {"count", s.count}};
}

std::string XmlEscape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

json NumberOrNull(double v) {
  return std::isfinite(v) ? json(Round6(v)) : json(nullptr);
}

}  // namespace

PowerGap MaxPowerGap(const PowerBand& subject, const PowerBand& baseline) {
  CheckSameGrid(subject, baseline);
  if (subject.grid_t_ms.empty())
    throw Error(ErrorCode::kGridMismatch, "bands have an empty grid");
  size_t best = 0;
  for (size_t i = 1; i < subject.grid_t_ms.size(); ++i) {
    if (subject.median_w[i] - baseline.median_w[i] >
        subject.median_w[best] - baseline.median_w[best]) {
      best = i;
    }
  }
  PowerGap gap;
  gap.t_ms = subject.grid_t_ms[best];
  gap.gap_w = subject.median_w[best] - baseline.median_w[best];
  const double ref = baseline.median_w[best];
  gap.gap_pct = ref != 0 ? gap.gap_w / ref * 100.0
                         : (gap.gap_w == 0 ? 0 : std::numeric_limits<double>::quiet_NaN());
  return gap;
}

SuspectRanking RankSuspects(const AlignedProfile& profile,
                            const PowerBand& subject, const PowerBand& baseline,
                            double gap_threshold_w) {
  CheckSameGrid(subject, baseline);
  std::vector<PowerPoint> diff;
  for (size_t i = 0; i < subject.grid_t_ms.size(); ++i)
    diff.push_back({subject.grid_t_ms[i], subject.median_w[i] - baseline.median_w[i]});

  SuspectRanking ranking;
  std::map<std::string, double> score;
  std::map<std::string, int64_t> ns_in_gap;
  int64_t all_ns_in_gap = 0;
  for (const ProfileRegion& r : profile.regions) {
    RegionGap rg{r.ordinal, r.energy_t0_ms, r.energy_t1_ms, 0, false};
    if (r.energy_t1_ms > r.energy_t0_ms && !diff.empty()) {
      rg.gap_w = MeanOver(diff, r.energy_t0_ms, r.energy_t1_ms);
      rg.is_gap_region = rg.gap_w >= gap_threshold_w;
    }
    ranking.regions.push_back(rg);
    if (!rg.is_gap_region) continue;
    for (const auto& [fn, ns] : r.functions) {
      if (ns <= 0) continue;
      score[fn] += static_cast<double>(ns) * rg.gap_w;
      ns_in_gap[fn] += ns;
      all_ns_in_gap += ns;
    }
  }
  if (std::none_of(ranking.regions.begin(), ranking.regions.end(),
                   [](const RegionGap& g) { return g.is_gap_region; })) {
    ranking.diagnostic = "NoGapRegions: no region has a mean power gap >= " +
                         Sig6(gap_threshold_w) + " W";
    return ranking;
  }
  for (const auto& [fn, s] : score) {
    ranking.rows.push_back(
        {fn, s,
         all_ns_in_gap > 0 ? static_cast<double>(ns_in_gap[fn]) /
                                 static_cast<double>(all_ns_in_gap)
                           : 0,
         ns_in_gap[fn]});
  }
  std::sort(ranking.rows.begin(), ranking.rows.end(),
            [](const SuspectRow& a, const SuspectRow& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.function < b.function;
            });
  return ranking;
}

std::string ReportJson(const ReportInputs& in) {
  json doc;
  doc["variants"] = json::array();
  const VariantStats* baseline = nullptr;
  for (const VariantStats& v : in.stats)
    if (v.label == in.baseline_label) baseline = &v;
  for (const VariantStats& v : in.stats) {
    json runs = json::array();
    for (size_t i = 0; i < v.energy_j.size(); ++i)
      runs.push_back({{"duration_s", Round6(v.duration_s[i])},
                      {"energy_j", Round6(v.energy_j[i])}});
    doc["variants"].push_back({{"label", v.label},
                               {"runs", runs},
                               {"duration_s", SummaryJson(v.duration)},
                               {"energy_j", SummaryJson(v.energy)},
                               {"energy_skewness", Round6(v.energy.skewness)},
                               {"symmetric", v.symmetric()}});
  }
  doc["diffs"] = json::array();
  if (baseline) {
    for (const VariantStats& v : in.stats) {
      if (&v == baseline) continue;
      doc["diffs"].push_back(
          {{"subject", v.label},
           {"baseline", baseline->label},
           {"energy_pct", NumberOrNull(EnergyDiffPct(v.energy.mean, baseline->energy.mean))},
           {"time_pct", NumberOrNull(EnergyDiffPct(v.duration.mean, baseline->duration.mean))}});
    }
  }
  if (in.max_gap) {
    doc["max_power_gap"] = {{"subject", in.subject_label},
                            {"baseline", in.baseline_label},
                            {"t_ms", Round6(in.max_gap->t_ms)},
                            {"gap_w", Round6(in.max_gap->gap_w)},
                            {"gap_pct", NumberOrNull(in.max_gap->gap_pct)}};
  } else {
    doc["max_power_gap"] = nullptr;
  }
  doc["suspects"] = json::array();
  for (const SuspectRow& s : in.ranking.rows) {
    doc["suspects"].push_back(
        {{"function", s.function},
         {"score", Round6(s.score)},
         {"share_in_gap_regions", Round6(s.share_in_gap_regions)},
         {"total_ns_in_gap_regions", s.total_ns_in_gap_regions}});
  }
  doc["gap_regions"] = json::array();
  for (const RegionGap& g : in.ranking.regions) {
    doc["gap_regions"].push_back({{"ordinal", g.ordinal},
                                  {"energy_t0_ms", Round6(g.energy_t0_ms)},
                                  {"energy_t1_ms", Round6(g.energy_t1_ms)},
                                  {"gap_w", Round6(g.gap_w)},
                                  {"is_gap_region", g.is_gap_region}});
  }
  doc["diagnostics"] = json::array();
  if (in.ranking.diagnostic) doc["diagnostics"].push_back(*in.ranking.diagnostic);
  doc["config_echo"] = in.config_echo;
  return doc.dump(2) + "\n";
}

std::string BandCsv(const PowerBand& band) {
  std::string out = "t_ms,median_w,q25_w,q75_w\n";
  for (size_t i = 0; i < band.grid_t_ms.size(); ++i) {
    out += Sig6(band.grid_t_ms[i]) + "," + Sig6(band.median_w[i]) + "," +
           Sig6(band.q25_w[i]) + "," + Sig6(band.q75_w[i]) + "\n";
  }
  return out;
}

std::string OverlaySvg(const ReportInputs& in) {
  constexpr double kWidth = 960;
  constexpr double kHeight = 540;
  constexpr double kLeft = 70;
  constexpr double kRight = 180;
  constexpr double kTop = 30;
  constexpr double kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  static const char* kLineColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  static const char* kBarColors[] = {"#8c564b", "#9467bd", "#e377c2", "#17becf",
                                     "#bcbd22", "#7f7f7f"};

  double t_max = 1;
  double p_max = 0;
  for (const PowerBand& b : in.bands) {
    if (!b.grid_t_ms.empty()) t_max = std::max(t_max, b.grid_t_ms.back());
    for (double v : b.q75_w) p_max = std::max(p_max, v);
  }
  for (const ProfileRegion& r : in.profile.regions)
    t_max = std::max(t_max, r.energy_t1_ms);
  p_max = p_max > 0 ? p_max * 1.1 : 1;

  auto x = [&](double t) { return kLeft + t / t_max * plot_w; };
  auto y = [&](double w) { return kTop + plot_h - w / p_max * plot_h; };

  // Stacked histogram: the five functions with the most aligned time, the
  // remainder as "other".
  std::map<std::string, int64_t> totals;
  for (const ProfileRegion& r : in.profile.regions)
    for (const auto& [fn, ns] : r.functions) totals[fn] += ns;
  std::vector<std::pair<std::string, int64_t>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> shown;
  for (size_t i = 0; i < ranked.size() && i < 5; ++i) shown.push_back(ranked[i].first);
  int64_t region_max = 0;
  for (const ProfileRegion& r : in.profile.regions) {
    int64_t sum = 0;
    for (const auto& [fn, ns] : r.functions) sum += ns;
    region_max = std::max(region_max, sum);
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<g class=\"axes\" stroke=\"black\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + plot_h << "\"/>\n</g>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">time (ms)</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + plot_h / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << kTop + plot_h / 2
      << ")\" text-anchor=\"middle\">power (W)</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double w = p_max * i / 4;
    svg << "<text class=\"tick\" x=\"" << kLeft - 6 << "\" y=\"" << Sig6(y(w) + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << Sig6(w) << "</text>\n";
  }

  // Histogram bars first so the power lines draw on top.
  if (region_max > 0) {
    for (const ProfileRegion& r : in.profile.regions) {
      double base = kTop + plot_h;
      const double x0 = x(r.energy_t0_ms) + 1;
      const double width = std::max(0.0, x(r.energy_t1_ms) - x(r.energy_t0_ms) - 2);
      std::vector<std::pair<std::string, int64_t>> parts;
      int64_t other = 0;
      for (const auto& [fn, ns] : r.functions) {
        if (std::find(shown.begin(), shown.end(), fn) != shown.end())
          parts.push_back({fn, ns});
        else
          other += ns;
      }
      std::sort(parts.begin(), parts.end(), [&](const auto& a, const auto& b) {
        return std::find(shown.begin(), shown.end(), a.first) <
               std::find(shown.begin(), shown.end(), b.first);
      });
      if (other > 0) parts.push_back({"other", other});
      for (const auto& [fn, ns] : parts) {
        if (ns <= 0) continue;
        const double h = static_cast<double>(ns) / static_cast<double>(region_max) *
                         plot_h * 0.4;
        auto pos = std::find(shown.begin(), shown.end(), fn);
        const size_t color = pos == shown.end() ? 5 : static_cast<size_t>(pos - shown.begin());
        svg << "<rect class=\"bar\" data-region=\"" << r.ordinal
            << "\" data-function=\"" << XmlEscape(fn) << "\" x=\"" << Sig6(x0) << "\" y=\""
            << Sig6(base - h) << "\" width=\"" << Sig6(width) << "\" height=\""
            << Sig6(h) << "\" fill=\"" << kBarColors[color]
            << "\" fill-opacity=\"0.45\"/>\n";
        base -= h;
      }
    }
  }

  for (size_t i = 1; i < in.profile.regions.size(); ++i) {
    const double cx = x(in.profile.regions[i].energy_t0_ms);
    svg << "<line class=\"checkpoint\" x1=\"" << Sig6(cx) << "\" y1=\"" << kTop
        << "\" x2=\"" << Sig6(cx) << "\" y2=\"" << kTop + plot_h
        << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n";
  }

  for (size_t bi = 0; bi < in.bands.size(); ++bi) {
    const PowerBand& b = in.bands[bi];
    const char* color = kLineColors[bi % 4];
    svg << "<polygon class=\"band\" data-label=\"" << XmlEscape(b.label) << "\" points=\"";
    for (size_t i = 0; i < b.grid_t_ms.size(); ++i)
      svg << Sig6(x(b.grid_t_ms[i])) << "," << Sig6(y(b.q75_w[i])) << " ";
    for (size_t i = b.grid_t_ms.size(); i-- > 0;)
      svg << Sig6(x(b.grid_t_ms[i])) << "," << Sig6(y(b.q25_w[i])) << " ";
    svg << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    svg << "<polyline class=\"median\" data-label=\"" << XmlEscape(b.label) << "\" points=\"";
    for (size_t i = 0; i < b.grid_t_ms.size(); ++i)
      svg << Sig6(x(b.grid_t_ms[i])) << "," << Sig6(y(b.median_w[i])) << " ";
    svg << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
  }

  // Legend.
  double ly = kTop + 10;
  const double lx = kLeft + plot_w + 15;
  for (size_t bi = 0; bi < in.bands.size(); ++bi) {
    svg << "<text class=\"legend\" x=\"" << lx << "\" y=\"" << ly
        << "\" font-size=\"11\" fill=\"" << kLineColors[bi % 4] << "\">"
        << XmlEscape(in.bands[bi].label) << " median</text>\n";
    ly += 16;
  }
  std::vector<std::string> legend_fns = shown;
  if (totals.size() > shown.size()) legend_fns.push_back("other");
  for (size_t i = 0; i < legend_fns.size(); ++i) {
    svg << "<text class=\"legend\" x=\"" << lx << "\" y=\"" << ly
        << "\" font-size=\"11\" fill=\"" << kBarColors[i < shown.size() ? i : 5]
        << "\">" << XmlEscape(legend_fns[i]) << "</text>\n";
    ly += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

void RenderReport(const ReportInputs& inputs, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot create " + out_dir.string() + ": " + ec.message());
  }
  util::WriteFile(out_dir / "report.json", ReportJson(inputs));
  for (const PowerBand& b : inputs.bands)
    util::WriteFile(out_dir / ("band_" + b.label + ".csv"), BandCsv(b));
  util::WriteFile(out_dir / "overlay.svg", OverlaySvg(inputs));
}

}  // namespace ediag
