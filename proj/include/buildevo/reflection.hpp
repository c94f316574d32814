#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "buildevo/common.hpp"
#include "buildevo/heuristic.hpp"
#include "buildevo/prompts.hpp"
#include "buildevo/provider.hpp"

// Reflections steer the genetic operators. Short-term reflections compare a
// crossover pair and feed the crossover prompt; long-term insights accumulate
// in a bounded FIFO and feed mutation prompts only. When the provider returns
// unusable text, deterministic fallback templates keep offline and online
// runs on identical code paths. ProviderUnavailable always propagates.

namespace buildevo {

inline constexpr size_t kLongTermCapacity = 10;
inline constexpr int kMaxInsightsPerGeneration = 3;

class ReflectionMemory {
public:
    explicit ReflectionMemory(size_t capacity = kLongTermCapacity)
        : capacity_(capacity) {}

    // Oldest evicted first once full; exact duplicates are skipped.
    bool add(const std::string& insight) {
        if (insight.empty()) return false;
        for (const auto& s : insights_)
            if (s == insight) return false;
        insights_.push_back(insight);
        while (insights_.size() > capacity_) insights_.pop_front();
        return true;
    }

    std::vector<std::string> oldest_first() const {
        return {insights_.begin(), insights_.end()};
    }

    size_t size() const { return insights_.size(); }
    size_t capacity() const { return capacity_; }

private:
    size_t capacity_;
    std::deque<std::string> insights_;
};

inline std::vector<std::string> segment_names(const HeuristicProgram& h) {
    std::vector<std::string> out;
    out.reserve(h.ast.segments.size());
    for (const auto& s : h.ast.segments) out.push_back(s.name);
    return out;
}

inline std::string render_short_reflection(double a_j,
                                           const std::vector<std::string>& a_names,
                                           double b_j,
                                           const std::vector<std::string>& b_names) {
    auto set_text = [](const std::vector<std::string>& names) {
        return "{" + join(names, ", ") + "}";
    };
    if (a_j < b_j)
        return "Parent A (J=" + format_double(a_j) + ") outperforms Parent B (J=" +
               format_double(b_j) + "); prefer A's segments " + set_text(a_names);
    if (b_j < a_j)
        return "Parent B (J=" + format_double(b_j) + ") outperforms Parent A (J=" +
               format_double(a_j) + "); prefer B's segments " + set_text(b_names);
    return "Parent A (J=" + format_double(a_j) + ") ties Parent B (J=" +
           format_double(b_j) + "); segments A " + set_text(a_names) +
           "; segments B " + set_text(b_names);
}

// Provider-backed comparison of a crossover pair; unusable responses fall
// back to the deterministic template above.
inline std::string reflect_short_term(Provider& provider, const PromptBuilder& prompts,
                                      const HeuristicProgram& a, double a_j,
                                      const HeuristicProgram& b, double b_j) {
    try {
        const ProviderResponse resp =
            provider.complete(prompts.reflect_short(a.source, a_j, b.source, b_j));
        if (resp.extracted && !resp.extracted->empty()) return *resp.extracted;
    } catch (const ResponseEmpty&) {
    }
    return render_short_reflection(a_j, segment_names(a), b_j, segment_names(b));
}

// ── Long-term insights ──────────────────────────────────────────

// Prompt-facing summary of a generation: the top few members by J.
inline std::string build_generation_summary(
    int generation, const std::vector<std::pair<std::string, double>>& ranked,
    size_t top_k = 5) {
    std::string out = "Generation " + std::to_string(generation) + ", top " +
                      std::to_string(std::min(top_k, ranked.size())) +
                      " heuristics by J (lower is better):\n";
    for (size_t i = 0; i < ranked.size() && i < top_k; ++i) {
        out += "\nRank " + std::to_string(i + 1) +
               " (J=" + format_double(ranked[i].second) + "):\n```\n" +
               ranked[i].first + "\n```\n";
    }
    return out;
}

// Rule-derived insights over the top-ranked sources, used when the provider
// response is unusable. Deterministic in the inputs.
inline std::vector<std::string> fallback_long_insights(
    const std::vector<std::pair<std::string, double>>& ranked, size_t top_k = 5) {
    const size_t n = std::min(top_k, ranked.size());
    size_t weather = 0, calendar = 0, smooth = 0;
    for (size_t i = 0; i < n; ++i) {
        const std::string& s = ranked[i].first;
        if (s.find("cdd(") != std::string::npos || s.find("hdd(") != std::string::npos)
            ++weather;
        if (s.find("is_weekend(") != std::string::npos ||
            s.find("dow(") != std::string::npos)
            ++calendar;
        if (s.find("roll_mean(") != std::string::npos) ++smooth;
    }
    std::vector<std::string> out;
    const std::string of = " of the top " + std::to_string(n) + " heuristics";
    if (weather > 0)
        out.push_back("Weather terms (cdd/hdd) appear in " + std::to_string(weather) +
                      of + "; keep a weather segment.");
    if (calendar > 0)
        out.push_back("Weekend/weekday calendar terms appear in " +
                      std::to_string(calendar) + of + ".");
    if (smooth > 0)
        out.push_back("roll_mean smoothing appears in " + std::to_string(smooth) + of +
                      "; it gives a stable baseline.");
    if (out.empty())
        out.push_back("Top heuristics rely on recent-history terms; try adding "
                      "weather or calendar segments.");
    if (out.size() > static_cast<size_t>(kMaxInsightsPerGeneration))
        out.resize(kMaxInsightsPerGeneration);
    return out;
}

// Splits a provider reply into at most three insight lines (bullets and
// numbering stripped); empty result falls back to the rule-derived insights.
inline std::vector<std::string> reflect_long_term(
    Provider& provider, const PromptBuilder& prompts, int generation,
    const std::vector<std::pair<std::string, double>>& ranked) {
    std::vector<std::string> lines;
    try {
        const ProviderResponse resp = provider.complete(
            prompts.reflect_long(build_generation_summary(generation, ranked)));
        if (resp.extracted) {
            for (auto part : split(*resp.extracted, '\n')) {
                std::string_view v = trim(part);
                while (!v.empty() && (v.front() == '-' || v.front() == '*')) {
                    v.remove_prefix(1);
                    v = trim(v);
                }
                size_t digits = 0;
                while (digits < v.size() &&
                       std::isdigit(static_cast<unsigned char>(v[digits])))
                    ++digits;
                if (digits > 0 && digits < v.size() &&
                    (v[digits] == '.' || v[digits] == ')'))
                    v = trim(v.substr(digits + 1));
                if (!v.empty()) lines.emplace_back(v);
                if (lines.size() >= static_cast<size_t>(kMaxInsightsPerGeneration))
                    break;
            }
        }
    } catch (const ResponseEmpty&) {
    }
    if (lines.empty()) return fallback_long_insights(ranked);
    return lines;
}

}  // namespace buildevo
