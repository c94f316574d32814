#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "buildevo/common.hpp"
#include "buildevo/evolution.hpp"
#include "buildevo/ledger.hpp"

// report.md renderer. Everything it needs lives in the run directory
// (config.json, generations.jsonl, best.dsl, pifl.json, baselines.json), so
// re-rendering a report from an unchanged run directory is byte-identical.

namespace buildevo {

namespace reportdetail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_double(v);
}

inline std::string json_num(const nlohmann::json& j) {
    if (j.is_null()) return "inf";
    if (j.is_number()) return num(j.get<double>());
    return "?";
}

}  // namespace reportdetail

inline std::string render_report(const nlohmann::json& config,
                                 const std::vector<CandidateRecord>& candidates,
                                 const std::string& best_source,
                                 const nlohmann::json& pifl,
                                 const nlohmann::json& baselines) {
    std::string md = "# Evolution run report\n\n";

    auto cfg_str = [&](const char* key) -> std::string {
        if (!config.contains(key)) return "?";
        const auto& v = config.at(key);
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    };
    md += "Objective **" + cfg_str("objective") + "**, population " + cfg_str("n") +
          ", " + cfg_str("generations") + " generations, seed " + cfg_str("seed") +
          ", provider " + cfg_str("provider") + ", segment attribution " +
          (config.value("use_pifl", true) ? std::string("on") : std::string("off")) +
          ".\n\n";

    // Best candidate row: minimal J, earliest on ties.
    const CandidateRecord* best = nullptr;
    for (const auto& r : candidates)
        if (!best || r.J < best->J) best = &r;

    md += "## Best heuristic\n\n";
    if (best) {
        md += "J = " + reportdetail::num(best->J) + " (" + cfg_str("objective") +
              "), first reached by `" + best->id + "` (operator " +
              to_string(best->op) + ", generation " + std::to_string(best->generation) +
              ").\n\n";
    }
    md += "```\n" + best_source + "\n```\n\n";

    md += "## Best-J trajectory\n\n";
    md += "| generation | best J so far |\n|---:|---:|\n";
    std::map<int, double> gen_min;
    for (const auto& r : candidates) {
        auto [it, inserted] = gen_min.emplace(r.generation, r.J);
        if (!inserted && r.J < it->second) it->second = r.J;
    }
    double running = std::numeric_limits<double>::infinity();
    for (const auto& [gen, j] : gen_min) {
        running = std::min(running, j);
        md += "| " + std::to_string(gen) + " | " + reportdetail::num(running) + " |\n";
    }
    md += "\n";

    md += "## Segment attribution (best heuristic)\n\n";
    if (pifl.is_object() && pifl.contains("segments") && !pifl["segments"].empty()) {
        md += "| segment | ablation dJ | abs share | note |\n|---|---:|---:|---|\n";
        for (const auto& s : pifl.at("segments")) {
            md += "| " + s.value("name", std::string("?")) + " | " +
                  reportdetail::json_num(s.contains("ablation_delta_J")
                                             ? s.at("ablation_delta_J")
                                             : nlohmann::json()) +
                  " | " +
                  reportdetail::json_num(s.contains("abs_share") ? s.at("abs_share")
                                                                 : nlohmann::json()) +
                  " | " +
                  (s.value("flagged", false) ? std::string("candidate for removal")
                                             : std::string("")) +
                  " |\n";
        }
    } else {
        md += "(not available for this run)\n";
    }
    md += "\n";

    md += "## Baseline comparison\n\n";
    md += "| model | MAPE | RMSE | MAE | failed windows |\n|---|---:|---:|---:|---:|\n";
    if (baselines.is_object() && baselines.contains("rows")) {
        for (const auto& row : baselines.at("rows")) {
            const int64_t failed = row.value("windows_failed", int64_t{0});
            const int64_t total = row.value("windows_total", int64_t{0});
            md += "| " + row.value("name", std::string("?")) + " | " +
                  reportdetail::json_num(row.contains("mape") ? row.at("mape")
                                                              : nlohmann::json()) +
                  " | " +
                  reportdetail::json_num(row.contains("rmse") ? row.at("rmse")
                                                              : nlohmann::json()) +
                  " | " +
                  reportdetail::json_num(row.contains("mae") ? row.at("mae")
                                                             : nlohmann::json()) +
                  " | " + std::to_string(failed) + "/" + std::to_string(total) + " |\n";
        }
    }
    return md;
}

// Convenience wrappers over the run-directory files.

inline nlohmann::ordered_json pifl_report_json(const PiflReport& r) {
    nlohmann::ordered_json j;
    j["heuristic_id"] = r.heuristic_id;
    j["J"] = ledgerdetail::finite_or_null(r.J_original);
    j["windows_used"] = r.windows_used;
    j["segments"] = nlohmann::ordered_json::array();
    for (const auto& s : r.segments) {
        nlohmann::ordered_json seg;
        seg["name"] = s.name;
        seg["ablation_delta_J"] = ledgerdetail::finite_or_null(s.ablation_delta_J);
        seg["abs_share"] = ledgerdetail::finite_or_null(s.abs_share);
        seg["flagged"] = s.ablation_delta_J <= 0;
        j["segments"].push_back(std::move(seg));
    }
    return j;
}

inline std::string render_report_from_dir(const RunPaths& paths) {
    const auto config = nlohmann::json::parse(ledgerdetail::read_file(paths.config()));
    const auto candidates =
        parse_generations_jsonl(ledgerdetail::read_file(paths.generations()));
    std::string best_source = ledgerdetail::read_file(paths.best());
    while (!best_source.empty() && best_source.back() == '\n') best_source.pop_back();
    const auto pifl = nlohmann::json::parse(ledgerdetail::read_file(paths.pifl()));
    const auto baselines =
        nlohmann::json::parse(ledgerdetail::read_file(paths.baselines()));
    return render_report(config, candidates, best_source, pifl, baselines);
}

}  // namespace buildevo
