#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buildevo/dsl/eval.hpp"
#include "buildevo/dsl/print.hpp"
#include "buildevo/evaluation.hpp"
#include "buildevo/heuristic.hpp"

// Per-segment attribution: each segment is ablated in turn (body replaced by
// the literal 0) and rescored, so a heuristic with S segments costs exactly
// 1 + S scoring passes. ablation_delta_J = J(ablated) - J(original); a
// non-positive delta means the segment does not pay for itself. abs_share is
// the segment's share of total absolute contribution over the windows the
// original program evaluated successfully; shares sum to 1.

namespace buildevo {

struct UnknownSegment : std::runtime_error {
    explicit UnknownSegment(const std::string& name)
        : std::runtime_error("no segment named '" + name + "'") {}
};

struct NonExecutable : std::runtime_error {
    explicit NonExecutable(const std::string& id)
        : std::runtime_error("heuristic " + id +
                             " is not executable; attribution needs a finite J") {}
};

struct SegmentStat {
    std::string name;
    double ablation_delta_J = 0;
    double abs_share = 0;
};

struct PiflReport {
    std::string heuristic_id;
    double J_original = 0;
    int64_t windows_used = 0;  // windows the original program evaluated on
    std::vector<SegmentStat> segments;  // sorted by delta descending
    std::string rendered_text;
};

inline HeuristicProgram ablate_segment(const HeuristicProgram& h,
                                       const std::string& name) {
    HeuristicProgram out = h;
    auto it = std::find_if(out.ast.segments.begin(), out.ast.segments.end(),
                           [&](const dsl::Segment& s) { return s.name == name; });
    if (it == out.ast.segments.end()) throw UnknownSegment(name);
    it->body = dsl::number(0);
    out.id = h.id + "~ablate:" + name;
    out.source = dsl::print_canonical(out.ast);
    return out;
}

inline std::string render_pifl_report(const PiflReport& r) {
    std::string out = "Segment contribution report (J=" +
                      format_double(r.J_original) + ", windows=" +
                      std::to_string(r.windows_used) + "):\n";
    for (const auto& s : r.segments) {
        out += "- " + s.name + ": ablation_delta_J=" + format_double(s.ablation_delta_J) +
               ", abs_share=" + format_double(s.abs_share);
        if (s.ablation_delta_J <= 0) out += " [candidate for removal]";
        out += '\n';
    }
    return out;
}

namespace detail {

// Scorer injection point: analyze() must be exactly 1 + S scoring passes, and
// tests verify that by counting calls through this hook.
using ScoreFn = std::function<EvaluationResult(const dsl::Program&)>;

inline PiflReport analyze_with_scorer(const HeuristicProgram& h,
                                      const std::vector<ForecastWindow>& windows,
                                      const MetadataIndex& metadata,
                                      const ScoreFn& score) {
    const EvaluationResult original = score(h.ast);
    if (!original.executable()) throw NonExecutable(h.id);

    PiflReport report;
    report.heuristic_id = h.id;
    report.J_original = original.J;

    // Absolute-contribution shares over the windows the original program
    // handles; this re-walks segment values but performs no extra scoring.
    const size_t seg_count = h.ast.segments.size();
    std::vector<double> abs_sum(seg_count, 0.0);
    double abs_total = 0.0;
    static const BuildingMetadata kNoMeta{};
    for (const auto& w : windows) {
        auto mi = metadata.find(w.building_id);
        const BuildingMetadata& meta = mi != metadata.end() ? mi->second : kNoMeta;
        const dsl::SegmentValues sv = dsl::segment_values(h.ast, w, meta);
        if (!sv.ok()) continue;
        ++report.windows_used;
        for (size_t s = 0; s < seg_count; ++s)
            for (double v : sv.values[s]) {
                abs_sum[s] += std::abs(v);
                abs_total += std::abs(v);
            }
    }

    for (size_t s = 0; s < seg_count; ++s) {
        SegmentStat stat;
        stat.name = h.ast.segments[s].name;
        const EvaluationResult ablated =
            score(ablate_segment(h, stat.name).ast);
        stat.ablation_delta_J = ablated.J - original.J;
        stat.abs_share = abs_total > 0 ? abs_sum[s] / abs_total : 0.0;
        report.segments.push_back(std::move(stat));
    }
    std::sort(report.segments.begin(), report.segments.end(),
              [](const SegmentStat& a, const SegmentStat& b) {
                  if (a.ablation_delta_J != b.ablation_delta_J)
                      return a.ablation_delta_J > b.ablation_delta_J;
                  return a.name < b.name;
              });
    report.rendered_text = render_pifl_report(report);
    return report;
}

}  // namespace detail

inline PiflReport analyze(const HeuristicProgram& h,
                          const std::vector<ForecastWindow>& windows,
                          const MetadataIndex& metadata,
                          const ObjectiveConfig& cfg = {}, unsigned threads = 1) {
    return detail::analyze_with_scorer(
        h, windows, metadata, [&](const dsl::Program& p) {
            return score_heuristic(p, windows, metadata, cfg, threads);
        });
}

}  // namespace buildevo
