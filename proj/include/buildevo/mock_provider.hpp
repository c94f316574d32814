#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "buildevo/common.hpp"
#include "buildevo/dsl/parse.hpp"
#include "buildevo/dsl/print.hpp"
#include "buildevo/provider.hpp"
#include "buildevo/reflection.hpp"

// Offline provider: every reply is a pure function of the operator, the
// fnv1a hash of the user prompt, and the constructor seed, so runs repeat
// byte-for-byte. It behaves like a cooperative-but-simple model:
//   init       -> cycles through a small library of valid programs
//   crossover  -> better parent's segments plus one segment from the other,
//                 then one constant nudged
//   mutation   -> removes the worst flagged segment when a contribution
//                 report marks one, otherwise nudges exactly one constant
//   reflection -> fixed templates derived from the prompt content

namespace buildevo {

namespace mockdetail {

inline uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double unit(uint64_t x) {
    return static_cast<double>(mix(x) >> 11) * 0x1.0p-53;
}

inline std::vector<std::string> fenced_blocks(const std::string& text) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        const size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        size_t begin = text.find('\n', open);
        if (begin == std::string::npos) break;
        ++begin;
        const size_t close = text.find("```", begin);
        if (close == std::string::npos) break;
        out.emplace_back(trim(std::string_view(text).substr(begin, close - begin)));
        pos = close + 3;
    }
    return out;
}

inline std::optional<double> number_after(const std::string& text, std::string_view key,
                                          size_t* where = nullptr) {
    const size_t at = text.find(key);
    if (at == std::string::npos) return std::nullopt;
    size_t i = at + key.size();
    const size_t start = i;
    while (i < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
            text[i] == '+' || text[i] == '-' || text[i] == 'e' || text[i] == 'E' ||
            text[i] == 'i' || text[i] == 'n' || text[i] == 'f'))
        ++i;
    if (where) *where = at;
    std::string tok = text.substr(start, i - start);
    if (tok.find("inf") != std::string::npos) {
        return std::numeric_limits<double>::infinity();
    }
    return parse_double(tok);
}

inline std::optional<std::string> fence_after(const std::string& text, size_t from) {
    const size_t open = text.find("```", from);
    if (open == std::string::npos) return std::nullopt;
    size_t begin = text.find('\n', open);
    if (begin == std::string::npos) return std::nullopt;
    ++begin;
    const size_t close = text.find("```", begin);
    if (close == std::string::npos) return std::nullopt;
    return std::string(trim(std::string_view(text).substr(begin, close - begin)));
}

// Numeric literals that are safe to scale: everything except window/lag
// arguments (their meaning is an integer index) and exact zeros.
inline void collect_tunable(dsl::Expr& e, bool shielded, std::vector<dsl::Expr*>& out) {
    if (e.kind == dsl::ExprKind::number) {
        if (!shielded && e.number != 0.0) out.push_back(&e);
        return;
    }
    bool shield_children = shielded;
    if (e.kind == dsl::ExprKind::call &&
        (e.text == "lag" || e.text == "roll_mean" || e.text == "roll_min" ||
         e.text == "roll_max" || e.text == "temp_lag"))
        shield_children = true;
    for (auto& arg : e.args) collect_tunable(arg, shield_children, out);
}

inline std::vector<dsl::Expr*> collect_tunable(dsl::Program& p) {
    std::vector<dsl::Expr*> out;
    for (auto& seg : p.segments) collect_tunable(seg.body, false, out);
    return out;
}

// Scales one literal by a factor in [0.85, 1.15); returns false when the
// program has no tunable literal.
inline bool nudge_one_literal(dsl::Program& p, uint64_t h) {
    auto tunable = collect_tunable(p);
    if (tunable.empty()) return false;
    dsl::Expr* target = tunable[mix(h ^ 0xc0ffeeull) % tunable.size()];
    const double factor = 0.85 + 0.3 * unit(h ^ 0xfeedull);
    target->number *= factor;
    return true;
}

}  // namespace mockdetail

class MockProvider : public Provider {
public:
    explicit MockProvider(uint64_t seed = 0) : seed_(seed) {
        library_ = {
            "segment base { lag(1) }",

            "segment base { lag(24) }",

            "segment base { lag(168) }",

            "segment base { roll_mean(24) }",

            "segment base { roll_mean(168) }\n"
            "segment cooling { cdd(18) * 0.5 }",

            "segment base { roll_mean(24) }\n"
            "segment weekend { if(is_weekend(), -3, 0) }",

            "segment base { roll_mean(168) }\n"
            "segment cooling { cdd(18) * 0.7 }\n"
            "segment weekend { if(is_weekend(), -3.5, 0) }",

            "segment recent { lag(24) * 0.6 }\n"
            "segment smooth { roll_mean(24) * 0.4 }",

            "segment base { roll_mean(24) }\n"
            "segment spike { hour() * 0.3 }",

            "segment base { roll_mean(24) }\n"
            "segment office { usage_is(\"Office\") * 2 }",
        };
    }

    std::string name() const override { return "mock"; }

    const std::vector<std::string>& library() const { return library_; }

    ProviderResponse complete(const PromptBundle& bundle) override {
        const uint64_t h = fnv1a(bundle.user) ^ seed_;
        std::string raw;
        switch (bundle.op) {
            case PromptOperator::init: raw = fence(do_init(bundle.user)); break;
            case PromptOperator::crossover: raw = fence(do_crossover(bundle.user, h)); break;
            case PromptOperator::mutation: raw = fence(do_mutation(bundle.user, h)); break;
            case PromptOperator::reflect_short: raw = do_reflect_short(bundle.user); break;
            case PromptOperator::reflect_long: raw = do_reflect_long(bundle.user); break;
        }
        return make_response(bundle.op, std::move(raw), 1, 0);
    }

private:
    static std::string fence(const std::string& source) {
        return "Here is the program:\n```\n" + source + "\n```\n";
    }

    std::string do_init(const std::string& user) const {
        size_t at = 0;
        auto idx = mockdetail::number_after(user, "Candidate ", &at);
        if (!idx || *idx < 1) return library_.front();
        const size_t i = static_cast<size_t>(*idx - 1) % library_.size();
        return library_[i];
    }

    std::string do_crossover(const std::string& user, uint64_t h) const {
        size_t a_at = 0, b_at = 0;
        auto a_j = mockdetail::number_after(user, "Parent A (J=", &a_at);
        auto b_j = mockdetail::number_after(user, "Parent B (J=", &b_at);
        auto a_src = a_j ? mockdetail::fence_after(user, a_at) : std::nullopt;
        auto b_src = b_j ? mockdetail::fence_after(user, b_at) : std::nullopt;
        if (!a_src || !b_src) return library_.front();

        // The reflection names the preferred parent; fall back to comparing J.
        bool prefer_a = *a_j <= *b_j;
        const size_t refl = user.find("Reflection: ");
        if (refl != std::string::npos) {
            const size_t out = user.find(" outperforms ", refl);
            if (out != std::string::npos) {
                const std::string_view lead =
                    std::string_view(user).substr(refl, out - refl);
                if (lead.find("Parent B (") != std::string_view::npos)
                    prefer_a = false;
                else if (lead.find("Parent A (") != std::string_view::npos)
                    prefer_a = true;
            }
        }

        auto better = dsl::try_parse(prefer_a ? *a_src : *b_src);
        auto other = dsl::try_parse(prefer_a ? *b_src : *a_src);
        if (!better || !other) return library_.front();

        dsl::Program child = *better;
        const dsl::Segment* donor = nullptr;
        for (const auto& seg : other->segments) {
            const bool collides =
                std::any_of(child.segments.begin(), child.segments.end(),
                            [&](const dsl::Segment& s) { return s.name == seg.name; });
            if (!collides) {
                donor = &seg;
                break;
            }
        }
        if (donor) {
            child.segments.push_back(*donor);
        } else {
            dsl::Segment renamed = other->segments[mockdetail::mix(h) %
                                                   other->segments.size()];
            renamed.name += "_alt";
            child.segments.push_back(renamed);
        }
        if (dsl::node_count(child) > dsl::kMaxNodes ||
            dsl::depth(child) > dsl::kMaxDepth)
            child = *better;
        mockdetail::nudge_one_literal(child, h);
        return dsl::print_canonical(child);
    }

    std::string do_mutation(const std::string& user, uint64_t h) const {
        size_t at = 0;
        auto elite_j = mockdetail::number_after(user, "Elite (J=", &at);
        auto src = elite_j ? mockdetail::fence_after(user, at) : std::nullopt;
        if (!src) return library_.front();
        auto parsed = dsl::try_parse(*src);
        if (!parsed) return library_.front();
        dsl::Program mutant = *parsed;

        // A contribution report flags removable segments; drop the worst one
        // (the flagged line with the lowest delta -- reports sort descending,
        // so that is the last flagged line).
        if (mutant.segments.size() >= 2) {
            std::string worst_flagged;
            size_t pos = 0;
            while ((pos = user.find("[candidate for removal]", pos)) !=
                   std::string::npos) {
                const size_t line_start = user.rfind("- ", pos);
                if (line_start != std::string::npos) {
                    const size_t colon = user.find(':', line_start);
                    if (colon != std::string::npos && colon < pos)
                        worst_flagged = user.substr(line_start + 2,
                                                    colon - line_start - 2);
                }
                pos += 1;
            }
            if (!worst_flagged.empty()) {
                auto it = std::find_if(mutant.segments.begin(), mutant.segments.end(),
                                       [&](const dsl::Segment& s) {
                                           return s.name == worst_flagged;
                                       });
                if (it != mutant.segments.end()) {
                    mutant.segments.erase(it);
                    return dsl::print_canonical(mutant);
                }
            }
        }

        if (!mockdetail::nudge_one_literal(mutant, h)) {
            dsl::Segment nudge;
            nudge.name = "nudge";
            nudge.body = dsl::number(0);
            mutant.segments.push_back(std::move(nudge));
        }
        return dsl::print_canonical(mutant);
    }

    std::string do_reflect_short(const std::string& user) const {
        size_t a_at = 0, b_at = 0;
        auto a_j = mockdetail::number_after(user, "Parent A (J=", &a_at);
        auto b_j = mockdetail::number_after(user, "Parent B (J=", &b_at);
        auto a_src = a_j ? mockdetail::fence_after(user, a_at) : std::nullopt;
        auto b_src = b_j ? mockdetail::fence_after(user, b_at) : std::nullopt;
        if (!a_j || !b_j || !a_src || !b_src)
            return "Parent A (J=0) ties Parent B (J=0); segments A {}; segments B {}";
        auto names = [](const std::string& source) {
            std::vector<std::string> out;
            if (auto p = dsl::try_parse(source))
                for (const auto& s : p->segments) out.push_back(s.name);
            return out;
        };
        return render_short_reflection(*a_j, names(*a_src), *b_j, names(*b_src));
    }

    std::string do_reflect_long(const std::string& user) const {
        std::vector<std::string> lines;
        if (user.find("cdd(") != std::string::npos ||
            user.find("hdd(") != std::string::npos)
            lines.push_back(
                "Weather-responsive segments (cdd/hdd terms) appear in the "
                "best heuristics; keep one.");
        if (user.find("is_weekend(") != std::string::npos ||
            user.find("dow(") != std::string::npos)
            lines.push_back(
                "Calendar segments that separate weekends from weekdays "
                "lower the objective.");
        if (user.find("roll_mean(") != std::string::npos)
            lines.push_back(
                "Smoothing recent history with roll_mean gives a stable "
                "baseline segment.");
        if (lines.empty())
            lines.push_back(
                "Small programs with two or three focused segments "
                "outperform monoliths.");
        if (lines.size() > 3) lines.resize(3);
        return join(lines, "\n");
    }

    uint64_t seed_;
    std::vector<std::string> library_;
};

}  // namespace buildevo
