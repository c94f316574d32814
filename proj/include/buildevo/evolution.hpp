#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "buildevo/evaluation.hpp"
#include "buildevo/heuristic.hpp"
#include "buildevo/pifl.hpp"
#include "buildevo/prompts.hpp"
#include "buildevo/provider.hpp"
#include "buildevo/reflection.hpp"

// The evolutionary loop. Each generation after the first is built from
// (N - 1 - mutation_count) crossover children, mutation_count mutations of
// archive elites, and the single best-so-far member carried over, keeping the
// population at exactly N. Parent selection draws each parent from the elite
// subset with probability 0.30, otherwise uniformly from all executable
// members. Mutation targets come from a cross-generation elite archive via a
// softmax over z-scored J. Every provider failure has a mechanical fallback;
// only ProviderUnavailable (and dataset errors) abort a run.

namespace buildevo {

struct NotEnoughExecutable : std::runtime_error {
    NotEnoughExecutable()
        : std::runtime_error("parent selection needs at least two executable members") {}
};

struct EmptyArchive : std::runtime_error {
    EmptyArchive() : std::runtime_error("elite archive is empty") {}
};

struct EvolutionConfig {
    int n = 20;                         // population size
    int generations = 10;               // offspring generations after init
    double elite_selection_prob = 0.30; // chance a parent draw uses the elite pool
    double elite_pool_frac = 0.20;      // top share (by J) forming that pool
    double tau = 1.0;                   // softmax temperature for archive sampling
    int mutation_count = -1;            // per generation; -1 -> ceil(n / 4)
    int archive_capacity = 64;
    uint64_t seed = 0;
    Objective objective = Objective::rmse;
    double fail_threshold = 0.1;        // failed-window ratio above which J = inf
    bool use_pifl = true;               // feed segment-attribution into mutations
    unsigned threads = 1;
    std::string seed_source = "segment base { lag(1) }";

    int resolved_mutation_count() const {
        const int m = mutation_count >= 0 ? mutation_count : (n + 3) / 4;
        return std::max(0, std::min(m, n - 1));
    }
};

struct ScoredMember {
    HeuristicProgram program;
    EvaluationResult result;
};

struct Population {
    int generation = 0;
    std::vector<ScoredMember> members;
};

// ── Cross-generation elite archive ──────────────────────────────

struct ArchiveEntry {
    std::string id;
    std::string source;
    std::string canonical;  // formatting-independent identity
    double J = 0;
    int generation = 0;
};

class EliteArchive {
public:
    explicit EliteArchive(size_t capacity = 64) : capacity_(capacity) {}

    // Finite-J entries only, deduplicated by canonical source; kept sorted by
    // (J, canonical) so the state is independent of insertion order. When
    // full, the worst (max-J) entry is evicted.
    bool add(ArchiveEntry entry) {
        if (!std::isfinite(entry.J)) return false;
        for (const auto& e : entries_)
            if (e.canonical == entry.canonical) return false;
        auto pos = std::upper_bound(entries_.begin(), entries_.end(), entry,
                                    [](const ArchiveEntry& a, const ArchiveEntry& b) {
                                        if (a.J != b.J) return a.J < b.J;
                                        return a.canonical < b.canonical;
                                    });
        entries_.insert(pos, std::move(entry));
        if (entries_.size() > capacity_) {
            entries_.pop_back();
            return true;  // the add happened even if something else fell out
        }
        return true;
    }

    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }
    size_t capacity() const { return capacity_; }
    const std::vector<ArchiveEntry>& entries() const { return entries_; }

    const ArchiveEntry& best() const {
        if (entries_.empty()) throw EmptyArchive();
        return entries_.front();
    }

private:
    size_t capacity_;
    std::vector<ArchiveEntry> entries_;  // ascending J
};

// Softmax over z-scored J (lower J -> higher weight); a single entry or a
// zero-variance archive degenerates to the uniform distribution. Exactly one
// RNG draw per call.
inline std::vector<double> elite_sampling_weights(const EliteArchive& archive,
                                                  double tau) {
    const auto& es = archive.entries();
    const size_t n = es.size();
    std::vector<double> p(n, 0.0);
    if (n == 0) return p;
    double mean = 0;
    for (const auto& e : es) mean += e.J;
    mean /= static_cast<double>(n);
    double var = 0;
    for (const auto& e : es) var += (e.J - mean) * (e.J - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (n == 1 || sd == 0.0) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return p;
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        const double z = (es[i].J - mean) / sd;
        p[i] = -z / tau;
        max_logit = std::max(max_logit, p[i]);
    }
    double total = 0;
    for (double& w : p) {
        w = std::exp(w - max_logit);
        total += w;
    }
    for (double& w : p) w /= total;
    return p;
}

inline size_t sample_elite_index(const EliteArchive& archive, double tau,
                                 std::mt19937_64& rng) {
    if (archive.empty()) throw EmptyArchive();
    const std::vector<double> p = elite_sampling_weights(archive, tau);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

// ── Parent selection ────────────────────────────────────────────

struct SelectionStats {
    int64_t draws = 0;
    int64_t elite_draws = 0;

    double elite_frequency() const {
        return draws == 0 ? 0.0 : static_cast<double>(elite_draws) /
                                      static_cast<double>(draws);
    }
};

// Two distinct parents (by canonical source). Each draw takes the elite pool
// (top ceil(20%) by J) with probability 0.30, otherwise the whole executable
// population. After 10 failed resamples for distinctness, the two lowest-J
// executable members are used.
inline std::pair<size_t, size_t> select_parents(const Population& pop,
                                                std::mt19937_64& rng,
                                                const EvolutionConfig& cfg,
                                                SelectionStats* stats = nullptr) {
    std::vector<size_t> exec;
    for (size_t i = 0; i < pop.members.size(); ++i)
        if (pop.members[i].result.executable()) exec.push_back(i);
    if (exec.size() < 2) throw NotEnoughExecutable();

    std::vector<size_t> by_j = exec;
    std::stable_sort(by_j.begin(), by_j.end(), [&](size_t a, size_t b) {
        return pop.members[a].result.J < pop.members[b].result.J;
    });
    const size_t pool_size = static_cast<size_t>(
        std::ceil(cfg.elite_pool_frac * static_cast<double>(exec.size())));
    const size_t elite_n = std::max<size_t>(1, std::min(pool_size, by_j.size()));

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto draw = [&]() {
        const bool elite = coin(rng) < cfg.elite_selection_prob;
        if (stats) {
            ++stats->draws;
            if (elite) ++stats->elite_draws;
        }
        if (elite) {
            std::uniform_int_distribution<size_t> d(0, elite_n - 1);
            return by_j[d(rng)];
        }
        std::uniform_int_distribution<size_t> d(0, exec.size() - 1);
        return exec[d(rng)];
    };

    const size_t a = draw();
    const std::string a_src = canonical_source(pop.members[a].program);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const size_t b = draw();
        if (b != a && canonical_source(pop.members[b].program) != a_src)
            return {a, b};
    }
    return {by_j[0], by_j[1]};
}

// ── Mechanical fallbacks ────────────────────────────────────────

namespace detail {

inline std::string unique_segment_name(const dsl::Program& p, std::string base) {
    auto taken = [&](const std::string& name) {
        return std::any_of(p.segments.begin(), p.segments.end(),
                           [&](const dsl::Segment& s) { return s.name == name; });
    };
    std::string name = std::move(base);
    int suffix = 1;
    while (taken(name)) name = name + "_" + std::to_string(suffix++);
    return name;
}

}  // namespace detail

// Copies the base program and multiplies one numeric literal by U(0.8, 1.25);
// a literal-free program first gains `segment nudge { 0 }`. Consumes exactly
// two RNG draws.
inline HeuristicProgram perturbed_copy(const dsl::Program& base, std::string id,
                                       Lineage lineage, int generation,
                                       std::mt19937_64& rng) {
    dsl::Program ast = base;
    std::vector<dsl::Expr*> literals = dsl::collect_numbers(ast);
    if (literals.empty() && dsl::node_count(ast) < dsl::kMaxNodes) {
        dsl::Segment s;
        s.name = detail::unique_segment_name(ast, "nudge");
        s.body = dsl::number(0);
        ast.segments.push_back(std::move(s));
        literals = dsl::collect_numbers(ast);
    }
    if (!literals.empty()) {
        std::uniform_int_distribution<size_t> pick(0, literals.size() - 1);
        std::uniform_real_distribution<double> factor(0.8, 1.25);
        dsl::Expr* target = literals[pick(rng)];
        target->number *= factor(rng);
    }
    HeuristicProgram h;
    h.id = std::move(id);
    h.ast = std::move(ast);
    h.source = dsl::print_canonical(h.ast);
    h.lineage = std::move(lineage);
    h.lineage.fallback = true;
    h.generation = generation;
    return h;
}

// Better parent's segments, with one segment from the other parent either
// replacing its same-named counterpart or appended.
inline HeuristicProgram splice_crossover(const ScoredMember& a, const ScoredMember& b,
                                         std::string id, int generation) {
    const ScoredMember& better = a.result.J <= b.result.J ? a : b;
    const ScoredMember& other = a.result.J <= b.result.J ? b : a;
    dsl::Program ast = better.program.ast;
    if (!other.program.ast.segments.empty()) {
        const dsl::Segment& donor = other.program.ast.segments.front();
        auto it = std::find_if(ast.segments.begin(), ast.segments.end(),
                               [&](const dsl::Segment& s) { return s.name == donor.name; });
        dsl::Program candidate = ast;
        if (it != ast.segments.end()) {
            candidate.segments[static_cast<size_t>(it - ast.segments.begin())].body =
                donor.body;
        } else {
            candidate.segments.push_back(donor);
        }
        if (dsl::node_count(candidate) <= dsl::kMaxNodes &&
            dsl::depth(candidate) <= dsl::kMaxDepth)
            ast = std::move(candidate);
    }
    HeuristicProgram h;
    h.id = std::move(id);
    h.ast = std::move(ast);
    h.source = dsl::print_canonical(h.ast);
    h.lineage = {GeneticOperator::crossover,
                 {a.program.id, b.program.id},
                 /*fallback=*/true};
    h.generation = generation;
    return h;
}

// ── Provider-backed operators (with retries) ────────────────────

inline constexpr int kOperatorAttempts = 3;  // initial call plus two retries

namespace detail {

inline std::optional<HeuristicProgram> try_make(const std::string& id,
                                                const ProviderResponse& resp,
                                                Lineage lineage, int generation) {
    if (!resp.extracted) return std::nullopt;
    try {
        return make_heuristic(id, *resp.extracted, std::move(lineage), generation);
    } catch (const dsl::SyntaxError&) {
    } catch (const dsl::ValidationError&) {
    }
    return std::nullopt;
}

}  // namespace detail

inline HeuristicProgram llm_init(Provider& provider, const PromptBuilder& prompts,
                                 int index, int count, const std::string& seed_source,
                                 const std::string& id, std::mt19937_64& rng) {
    for (int attempt = 0; attempt < kOperatorAttempts; ++attempt) {
        try {
            const ProviderResponse resp =
                provider.complete(prompts.init(index, count, seed_source));
            if (auto h = detail::try_make(id, resp, {GeneticOperator::init, {}, false}, 0))
                return std::move(*h);
        } catch (const ResponseEmpty&) {
        }
    }
    const dsl::Program seed = dsl::parse(seed_source);
    return perturbed_copy(seed, id, {GeneticOperator::init, {}, true}, 0, rng);
}

inline HeuristicProgram llm_crossover(Provider& provider, const PromptBuilder& prompts,
                                      const ScoredMember& a, const ScoredMember& b,
                                      const std::string& reflection,
                                      const std::string& id, int generation) {
    Lineage lineage{GeneticOperator::crossover, {a.program.id, b.program.id}, false};
    for (int attempt = 0; attempt < kOperatorAttempts; ++attempt) {
        try {
            const ProviderResponse resp = provider.complete(prompts.crossover(
                a.program.source, a.result.J, b.program.source, b.result.J, reflection));
            if (auto h = detail::try_make(id, resp, lineage, generation))
                return std::move(*h);
        } catch (const ResponseEmpty&) {
        }
    }
    return splice_crossover(a, b, id, generation);
}

inline HeuristicProgram llm_mutation(Provider& provider, const PromptBuilder& prompts,
                                     const ArchiveEntry& elite,
                                     const std::string& pifl_text,
                                     const std::vector<std::string>& insights,
                                     const std::string& id, int generation,
                                     std::mt19937_64& rng) {
    Lineage lineage{GeneticOperator::mutation, {elite.id}, false};
    for (int attempt = 0; attempt < kOperatorAttempts; ++attempt) {
        try {
            const ProviderResponse resp = provider.complete(
                prompts.mutation(elite.source, elite.J, pifl_text, insights));
            if (auto h = detail::try_make(id, resp, lineage, generation))
                return std::move(*h);
        } catch (const ResponseEmpty&) {
        }
    }
    const dsl::Program base = dsl::parse(elite.source);
    return perturbed_copy(base, id, {GeneticOperator::mutation, {elite.id}, false},
                          generation, rng);
}

// ── Run orchestration ───────────────────────────────────────────

struct CandidateRecord {
    std::string id;
    int generation = 0;  // population the row belongs to
    GeneticOperator op = GeneticOperator::init;
    std::vector<std::string> parent_ids;
    std::string source;
    double J = 0;
    double rmse = 0;
    double mae = 0;
    double mape = 0;
    int64_t windows_failed = 0;
    bool fallback = false;
};

struct ReflectionRecord {
    int generation = 0;
    std::string kind;  // "short" | "long"
    std::string text;
    std::vector<std::string> pair_ids;  // short reflections only
};

struct RunResult {
    std::vector<CandidateRecord> candidates;
    std::vector<ReflectionRecord> reflections;
    EliteArchive archive{64};
    Population population;
    ScoredMember best;
    std::vector<double> best_j_by_generation;     // archive best after each gen
    std::vector<std::string> best_pifl_by_generation;  // rendered report or ""
};

inline std::string candidate_id(int generation, int index) {
    const std::string num =
        index < 10 ? "0" + std::to_string(index) : std::to_string(index);
    return "g" + std::to_string(generation) + "-c" + num;
}

inline RunResult run_evolution(const EvolutionConfig& cfg,
                               const std::vector<ForecastWindow>& train_windows,
                               const MetadataIndex& metadata, Provider& provider,
                               const PromptTemplates& templates) {
    if (cfg.n < 1) throw std::invalid_argument("population size must be >= 1");
    if (cfg.generations < 0) throw std::invalid_argument("generations must be >= 0");
    if (cfg.tau <= 0) throw std::invalid_argument("tau must be positive");

    const ObjectiveConfig obj_cfg{cfg.objective, cfg.fail_threshold};
    auto score = [&](const dsl::Program& p) {
        return score_heuristic(p, train_windows, metadata, obj_cfg, cfg.threads);
    };

    std::set<std::string> building_ids;
    for (const auto& w : train_windows) building_ids.insert(w.building_id);
    const int t_obs = train_windows.empty()
                          ? 168
                          : static_cast<int>(train_windows.front().t_obs());
    const int t_pred = train_windows.empty()
                           ? 24
                           : static_cast<int>(train_windows.front().t_pred());
    PromptBuilder prompts(templates,
                          describe_task(t_obs, t_pred, to_string(cfg.objective),
                                        building_ids.size(), train_windows.size()));

    RunResult out;
    out.archive = EliteArchive(static_cast<size_t>(cfg.archive_capacity));
    std::mt19937_64 rng(cfg.seed);
    ReflectionMemory memory;

    std::optional<ScoredMember> best;
    auto consider_best = [&](const ScoredMember& m) {
        if (!best || m.result.J < best->result.J) best = m;
    };
    auto record_member = [&](const ScoredMember& m, int generation) {
        CandidateRecord r;
        r.id = m.program.id;
        r.generation = generation;
        r.op = m.program.lineage.op;
        r.parent_ids = m.program.lineage.parent_ids;
        r.source = m.program.source;
        r.J = m.result.J;
        r.rmse = m.result.rmse;
        r.mae = m.result.mae;
        r.mape = m.result.mape;
        r.windows_failed = m.result.windows_failed;
        r.fallback = m.program.lineage.fallback;
        out.candidates.push_back(std::move(r));
    };
    auto archive_member = [&](const ScoredMember& m) {
        out.archive.add({m.program.id, m.program.source,
                         canonical_source(m.program), m.result.J,
                         m.program.generation});
    };
    auto end_of_generation = [&](Population& pop) {
        for (const auto& m : pop.members) {
            record_member(m, pop.generation);
            archive_member(m);
            consider_best(m);
        }
        // Long-term insights for the next generation's mutation prompts.
        std::vector<std::pair<std::string, double>> ranked;
        for (const auto& m : pop.members)
            if (m.result.executable()) ranked.emplace_back(m.program.source, m.result.J);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; });
        if (!ranked.empty()) {
            const auto insights =
                reflect_long_term(provider, prompts, pop.generation, ranked);
            for (const auto& text : insights) {
                memory.add(text);
                out.reflections.push_back({pop.generation, "long", text, {}});
            }
        }
        // Attribution for the best heuristic so far, for the run report.
        std::string best_pifl;
        if (cfg.use_pifl && best && best->result.executable()) {
            try {
                best_pifl = detail::analyze_with_scorer(best->program, train_windows,
                                                        metadata, score)
                                .rendered_text;
            } catch (const NonExecutable&) {
            }
        }
        out.best_pifl_by_generation.push_back(std::move(best_pifl));
        out.best_j_by_generation.push_back(
            out.archive.empty() ? std::numeric_limits<double>::infinity()
                                : out.archive.best().J);
    };

    // Generation 0: provider-initialized population.
    Population pop;
    pop.generation = 0;
    for (int i = 1; i <= cfg.n; ++i) {
        HeuristicProgram h = llm_init(provider, prompts, i, cfg.n, cfg.seed_source,
                                      candidate_id(0, i), rng);
        EvaluationResult r = score(h.ast);
        pop.members.push_back({std::move(h), std::move(r)});
    }
    end_of_generation(pop);

    for (int gen = 1; gen <= cfg.generations; ++gen) {
        const ScoredMember carried = *best;  // best over all prior generations
        const int mutations = cfg.resolved_mutation_count();
        const int crossovers = cfg.n - 1 - mutations;
        std::vector<ScoredMember> next;
        next.reserve(static_cast<size_t>(cfg.n));
        int counter = 1;

        for (int c = 0; c < crossovers; ++c) {
            const std::string id = candidate_id(gen, counter++);
            HeuristicProgram child;
            try {
                const auto [ia, ib] = select_parents(pop, rng, cfg);
                const ScoredMember& a = pop.members[ia];
                const ScoredMember& b = pop.members[ib];
                const std::string reflection = reflect_short_term(
                    provider, prompts, a.program, a.result.J, b.program, b.result.J);
                out.reflections.push_back(
                    {gen, "short", reflection, {a.program.id, b.program.id}});
                child = llm_crossover(provider, prompts, a, b, reflection, id, gen);
            } catch (const NotEnoughExecutable&) {
                child = perturbed_copy(
                    carried.program.ast, id,
                    {GeneticOperator::crossover, {carried.program.id}, false}, gen, rng);
            }
            EvaluationResult r = score(child.ast);
            next.push_back({std::move(child), std::move(r)});
        }

        for (int m = 0; m < mutations; ++m) {
            const std::string id = candidate_id(gen, counter++);
            HeuristicProgram mutant;
            if (out.archive.empty()) {
                mutant = perturbed_copy(
                    carried.program.ast, id,
                    {GeneticOperator::mutation, {carried.program.id}, false}, gen, rng);
            } else {
                const size_t ei = sample_elite_index(out.archive, cfg.tau, rng);
                const ArchiveEntry& elite = out.archive.entries()[ei];
                std::string pifl_text;
                if (cfg.use_pifl) {
                    try {
                        HeuristicProgram target =
                            make_heuristic(elite.id, elite.source);
                        pifl_text = detail::analyze_with_scorer(target, train_windows,
                                                                metadata, score)
                                        .rendered_text;
                    } catch (const NonExecutable&) {
                    }
                }
                mutant = llm_mutation(provider, prompts, elite, pifl_text,
                                      memory.oldest_first(), id, gen, rng);
            }
            EvaluationResult r = score(mutant.ast);
            next.push_back({std::move(mutant), std::move(r)});
        }

        next.push_back(carried);
        pop.generation = gen;
        pop.members = std::move(next);
        end_of_generation(pop);
    }

    out.population = std::move(pop);
    out.best = *best;
    return out;
}

}  // namespace buildevo
