// Random-program generators for totality and additivity tests.
//
// random_program emits source text that always parses and validates:
// arities are exact, node and depth budgets are respected with margin,
// and string literals appear only inside usage_is(...). Runtime failures
// (division by zero, log of a negative, budget exhaustion) are still
// possible and deliberate - evaluation must report them, not crash.
//
// random_token_soup emits hostile text for parser totality: truncated
// programs, unbalanced brackets, stray strings, bad numbers.
#pragma once

#include <random>
#include <string>
#include <vector>

namespace fuzz {

struct FuzzConfig {
    int max_segments = 4;
    int max_depth = 10;     // well under the validator's 32
    int max_nodes = 200;    // well under the validator's 512, summed over segments
};

namespace detail {

inline int pick(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::string number(std::mt19937_64& rng) {
    static const char* fixed[] = {"0", "1", "2", "0.5", "3.25", "18", "24", "100"};
    if (pick(rng, 0, 2) == 0) return fixed[pick(rng, 0, 7)];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f",
                  std::uniform_real_distribution<double>(0.0, 50.0)(rng));
    return buf;
}

// Emits an expression, spending from `nodes` (1 per produced AST node).
// Callers guarantee nodes >= 1.
inline std::string expr(std::mt19937_64& rng, int depth, int& nodes) {
    --nodes;
    if (depth <= 1 || nodes < 4) {
        static const char* leaves[] = {"hour()",  "dow()",        "month()",
                                       "temp()",  "is_weekend()", "humidity()",
                                       "wind()",  "irradiance()", "sqft()",
                                       "year_built()"};
        return pick(rng, 0, 1) ? number(rng) : leaves[pick(rng, 0, 9)];
    }
    switch (pick(rng, 0, 11)) {
        case 0: return number(rng);
        case 1: {
            static const char* calls[] = {"hour()", "temp()", "is_weekend()",
                                          "irradiance()"};
            return calls[pick(rng, 0, 3)];
        }
        case 2: {  // history call: name(int), the int literal costs one node
            --nodes;
            switch (pick(rng, 0, 4)) {
                case 0: return "lag(" + std::to_string(pick(rng, 1, 200)) + ")";
                case 1: return "roll_mean(" + std::to_string(pick(rng, 1, 400)) + ")";
                case 2: return "roll_min(" + std::to_string(pick(rng, 1, 400)) + ")";
                case 3: return "roll_max(" + std::to_string(pick(rng, 1, 400)) + ")";
                default: return "temp_lag(" + std::to_string(pick(rng, 0, 48)) + ")";
            }
        }
        case 3:
            --nodes;
            return (pick(rng, 0, 1) ? "hdd(" : "cdd(") +
                   std::to_string(pick(rng, 0, 30)) + ")";
        case 4:
            return "usage_is(\"" +
                   std::string(pick(rng, 0, 1) ? "Office" : "Education") + "\")";
        case 5:
            return (pick(rng, 0, 1) ? "-" : "!") + expr(rng, depth - 1, nodes);
        case 6: {
            static const char* ops[] = {" + ", " - ", " * ", " / "};
            const std::string lhs = expr(rng, depth - 1, nodes);
            return "(" + lhs + ops[pick(rng, 0, 3)] + expr(rng, depth - 1, nodes) + ")";
        }
        case 7: {
            static const char* ops[] = {" < ", " <= ", " > ", " >= ", " == ", " != "};
            const std::string lhs = expr(rng, depth - 1, nodes);
            return "(" + lhs + ops[pick(rng, 0, 5)] + expr(rng, depth - 1, nodes) + ")";
        }
        case 8: {
            const std::string lhs = expr(rng, depth - 1, nodes);
            return "(" + lhs + (pick(rng, 0, 1) ? " && " : " || ") +
                   expr(rng, depth - 1, nodes) + ")";
        }
        case 9: {
            static const char* calls[] = {"abs", "exp", "log", "sqrt"};
            return std::string(calls[pick(rng, 0, 3)]) + "(" +
                   expr(rng, depth - 1, nodes) + ")";
        }
        case 10: {
            const char* name = pick(rng, 0, 2) == 0   ? "min"
                               : pick(rng, 0, 1) == 0 ? "max"
                                                      : "clamp";
            std::string out = std::string(name) + "(" + expr(rng, depth - 1, nodes) +
                              ", " + expr(rng, depth - 1, nodes);
            if (out[0] == 'c') out += ", " + expr(rng, depth - 1, nodes);
            return out + ")";
        }
        default: {
            const std::string c = expr(rng, depth - 1, nodes);
            const std::string a = expr(rng, depth - 1, nodes);
            return "if(" + c + ", " + a + ", " + expr(rng, depth - 1, nodes) + ")";
        }
    }
}

}  // namespace detail

inline std::string random_program(std::mt19937_64& rng, const FuzzConfig& cfg = {}) {
    const int segments = detail::pick(rng, 1, cfg.max_segments);
    int nodes = cfg.max_nodes - segments;  // reserve one leaf per segment
    std::string out;
    for (int s = 0; s < segments; ++s) {
        const int budget = std::max(1, nodes / (segments - s));
        int spend = detail::pick(rng, 1, budget);
        nodes -= spend;
        int local = spend + 1;
        out += "segment seg" + std::to_string(s) + " {\n  " +
               detail::expr(rng, cfg.max_depth, local) + "\n}\n";
        nodes += std::max(0, local);
    }
    return out;
}

// Hostile inputs: fragments recombined into mostly-invalid programs.
inline std::string random_token_soup(std::mt19937_64& rng) {
    static const char* frags[] = {
        "segment",    "seg",        "{",       "}",        "(",         ")",
        "lag",        "lag(",       "lag(1)",  "roll_mean", "usage_is", "\"Office\"",
        "\"unterminated", "+",      "-",       "*",        "/",         "&&",
        "||",         "!",          "<",       "<=",       "==",        "=",
        "if",         "if(",        ",",       "1",        "2.5",       "1e",
        "1e999",      ".5.",        "0x10",    "foo",      "_bar",      "9segment",
        "#comment",   "\n",         " ",       "segment s { 1 }",       "@",
        "$",          "~",          "\t",      "%",        "``",        "clamp(1,2)",
    };
    const int n = detail::pick(rng, 0, 40);
    std::string out;
    for (int i = 0; i < n; ++i) {
        out += frags[detail::pick(rng, 0, static_cast<int>(std::size(frags)) - 1)];
        if (detail::pick(rng, 0, 2) == 0) out += ' ';
    }
    return out;
}

}  // namespace fuzz
