#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "buildevo/common.hpp"
#include "buildevo/dsl/ast.hpp"
#include "buildevo/provider.hpp"

// Prompt assembly. Templates live as files under prompts/ and as embedded
// defaults compiled in here; a test asserts the two stay byte-identical.
// Placeholders use {{NAME}} substitution. Bundles are clamped to a character
// budget; for mutation prompts the oldest long-term insights are dropped
// first before any hard truncation.

namespace buildevo {

inline constexpr int kPromptCharBudget = 16000;

namespace detail {

inline void replace_all(std::string& s, std::string_view key, std::string_view value) {
    size_t pos = 0;
    while ((pos = s.find(key, pos)) != std::string::npos) {
        s.replace(pos, key.size(), value);
        pos += value.size();
    }
}

}  // namespace detail

// One help line per builtin; kept next to the registry so the system prompt
// always carries the complete list (a test cross-checks every builtin name).
inline std::string builtin_reference() {
    return
        "- lag(k): consumption k hours before the forecast step (observed history,\n"
        "  then the model's own earlier predictions)\n"
        "- roll_mean(w): mean of the last w observed hours (w is clamped to the\n"
        "  available history)\n"
        "- roll_min(w), roll_max(w): min/max of the last w observed hours\n"
        "- hour(): local hour of day 0..23 at the forecast step\n"
        "- dow(): day of week 0..6, Monday = 0\n"
        "- month(): month 1..12\n"
        "- is_weekend(): 1 on Saturday/Sunday, else 0\n"
        "- temp(), humidity(), wind(), irradiance(): weather forecast at the step\n"
        "- temp_lag(k): temperature k hours before the forecast step\n"
        "- hdd(base): max(0, base - temp()); cdd(base): max(0, temp() - base)\n"
        "- sqft(): building floor area; year_built(): construction year\n"
        "- usage_is(\"Office\"): 1 when the building's primary usage matches\n"
        "  (case-insensitive)\n"
        "- min(a, b), max(a, b), abs(x), clamp(x, lo, hi)\n"
        "- exp(x), log(x), sqrt(x)\n"
        "- if(cond, a, b): conditional, evaluates only the taken branch\n";
}

struct PromptTemplates {
    std::string system;
    std::string init;
    std::string crossover;
    std::string mutation;
    std::string reflect_short;
    std::string reflect_long;
};

inline PromptTemplates embedded_templates() {
    PromptTemplates t;
    t.system = R"tpl(You are an expert in short-term building energy forecasting. You write small,
interpretable forecasting heuristics in a tiny domain-specific language.

A program is one or more named segments; the forecast at each step is the sum
of all segment values:

segment <name> { <expr> }
segment <other> { <expr> }

Expressions support + - * /, unary -, comparisons (< <= > >= == !=), boolean
&& || ! (non-zero is true), numeric literals, and these builtins:

{{BUILTINS}}
Rules:
- at most 512 nodes and nesting depth 32 per program
- string literals may appear only as the argument of usage_is(...)
- when asked for a program, reply with exactly one program inside a single
  fenced code block and nothing else inside the fence
)tpl";
    t.init = R"tpl({{TASK}}

Candidate {{INDEX}} of {{COUNT}}. Write one new forecasting heuristic program.
Aim for one to four segments with distinct roles (history, weather, calendar).
A known reasonable starting point:

```
{{SEED}}
```

Reply with exactly one program in a fenced code block.
)tpl";
    t.crossover = R"tpl({{TASK}}

Combine the strengths of the two parent heuristics below into one child
program. Keep segments that plausibly lower the objective; drop or merge weak
ones. The child must be a valid program and should not copy either parent
verbatim.

Parent A (J={{A_J}}):
```
{{A_SOURCE}}
```

Parent B (J={{B_J}}):
```
{{B_SOURCE}}
```

Reflection: {{REFLECTION}}

Reply with exactly one program in a fenced code block.
)tpl";
    t.mutation = R"tpl({{TASK}}

Improve the heuristic below with one focused change: adjust a constant,
remove or replace a weak segment, or add one new segment.

Elite (J={{ELITE_J}}):
```
{{ELITE_SOURCE}}
```

{{PIFL}}

What has worked so far:
{{INSIGHTS}}

Reply with exactly one program in a fenced code block.
)tpl";
    t.reflect_short = R"tpl(Compare the two parent heuristics below. In one or two sentences, state which
parent performs better (lower J) and which of its segments look responsible.

Parent A (J={{A_J}}):
```
{{A_SOURCE}}
```

Parent B (J={{B_J}}):
```
{{B_SOURCE}}
```
)tpl";
    t.reflect_long = R"tpl(Below is a summary of the latest generation of forecasting heuristics. Derive
at most three short, general insights about what makes heuristics score well
on this task. One insight per line, no numbering.

{{SUMMARY}}
)tpl";
    return t;
}

namespace detail {

inline const char* template_filename(PromptOperator op) {
    switch (op) {
        case PromptOperator::init: return "init.txt";
        case PromptOperator::crossover: return "crossover.txt";
        case PromptOperator::mutation: return "mutation.txt";
        case PromptOperator::reflect_short: return "reflect_short.txt";
        case PromptOperator::reflect_long: return "reflect_long.txt";
    }
    return "";
}

inline std::optional<std::string> read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

// Loads prompts/<op>.txt plus system.txt; any missing file falls back to the
// embedded default for that slot.
inline PromptTemplates load_templates(const std::filesystem::path& dir) {
    PromptTemplates t = embedded_templates();
    if (auto s = detail::read_text_file(dir / "system.txt")) t.system = *s;
    if (auto s = detail::read_text_file(dir / "init.txt")) t.init = *s;
    if (auto s = detail::read_text_file(dir / "crossover.txt")) t.crossover = *s;
    if (auto s = detail::read_text_file(dir / "mutation.txt")) t.mutation = *s;
    if (auto s = detail::read_text_file(dir / "reflect_short.txt")) t.reflect_short = *s;
    if (auto s = detail::read_text_file(dir / "reflect_long.txt")) t.reflect_long = *s;
    return t;
}

class PromptBuilder {
public:
    PromptBuilder(PromptTemplates templates, std::string task_description,
                  int char_budget = kPromptCharBudget)
        : templates_(std::move(templates)),
          task_(std::move(task_description)),
          budget_(char_budget) {
        system_ = templates_.system;
        detail::replace_all(system_, "{{BUILTINS}}", builtin_reference());
    }

    const std::string& system_prompt() const { return system_; }

    PromptBundle init(int index, int count, const std::string& seed_source) const {
        std::string u = templates_.init;
        detail::replace_all(u, "{{TASK}}", task_);
        detail::replace_all(u, "{{INDEX}}", std::to_string(index));
        detail::replace_all(u, "{{COUNT}}", std::to_string(count));
        detail::replace_all(u, "{{SEED}}", seed_source);
        return finish(PromptOperator::init, std::move(u));
    }

    PromptBundle crossover(const std::string& a_source, double a_j,
                           const std::string& b_source, double b_j,
                           const std::string& reflection) const {
        std::string u = templates_.crossover;
        detail::replace_all(u, "{{TASK}}", task_);
        detail::replace_all(u, "{{A_J}}", format_double(a_j));
        detail::replace_all(u, "{{A_SOURCE}}", a_source);
        detail::replace_all(u, "{{B_J}}", format_double(b_j));
        detail::replace_all(u, "{{B_SOURCE}}", b_source);
        detail::replace_all(u, "{{REFLECTION}}",
                            reflection.empty() ? std::string("(none)") : reflection);
        return finish(PromptOperator::crossover, std::move(u));
    }

    // insights arrive oldest-first; over-budget prompts drop from the front.
    PromptBundle mutation(const std::string& elite_source, double elite_j,
                          const std::string& pifl_text,
                          std::vector<std::string> insights) const {
        for (size_t drop = 0; ; ++drop) {
            std::string u = templates_.mutation;
            detail::replace_all(u, "{{TASK}}", task_);
            detail::replace_all(u, "{{ELITE_J}}", format_double(elite_j));
            detail::replace_all(u, "{{ELITE_SOURCE}}", elite_source);
            detail::replace_all(u, "{{PIFL}}", pifl_text);
            std::string joined;
            for (size_t i = drop; i < insights.size(); ++i) {
                joined += "- ";
                joined += insights[i];
                joined += '\n';
            }
            if (joined.empty()) joined = "(none yet)\n";
            detail::replace_all(u, "{{INSIGHTS}}", joined);
            if (static_cast<int>(system_.size() + u.size()) <= budget_ ||
                drop >= insights.size()) {
                return finish(PromptOperator::mutation, std::move(u));
            }
        }
    }

    PromptBundle reflect_short(const std::string& a_source, double a_j,
                               const std::string& b_source, double b_j) const {
        std::string u = templates_.reflect_short;
        detail::replace_all(u, "{{A_J}}", format_double(a_j));
        detail::replace_all(u, "{{A_SOURCE}}", a_source);
        detail::replace_all(u, "{{B_J}}", format_double(b_j));
        detail::replace_all(u, "{{B_SOURCE}}", b_source);
        return finish(PromptOperator::reflect_short, std::move(u));
    }

    PromptBundle reflect_long(const std::string& summary) const {
        std::string u = templates_.reflect_long;
        detail::replace_all(u, "{{SUMMARY}}", summary);
        return finish(PromptOperator::reflect_long, std::move(u));
    }

private:
    PromptBundle finish(PromptOperator op, std::string user) const {
        const int over = static_cast<int>(system_.size() + user.size()) - budget_;
        if (over > 0) {
            const size_t keep =
                user.size() > static_cast<size_t>(over) ? user.size() - over : 0;
            user.resize(keep);
        }
        PromptBundle b;
        b.system = system_;
        b.user = std::move(user);
        b.op = op;
        b.token_budget_hint = budget_ / 4;
        return b;
    }

    PromptTemplates templates_;
    std::string task_;
    int budget_;
    std::string system_;
};

// Human-readable task context shared by every prompt for a run.
inline std::string describe_task(int t_obs, int t_pred, const std::string& objective,
                                 size_t building_count, size_t train_windows) {
    std::ostringstream ss;
    ss << "Task: forecast hourly building energy consumption " << t_pred
       << " hours ahead from the previous " << t_obs
       << " observed hours, for " << building_count
       << " building(s). Programs are scored by pooled " << objective << " over "
       << train_windows
       << " training window(s); lower J is better. Failed windows count against"
          " the score, so prefer safe expressions (e.g. guard divisions).";
    return ss.str();
}

}  // namespace buildevo
