#pragma once

#include <string>
#include <utility>
#include <vector>

#include "buildevo/dsl/ast.hpp"
#include "buildevo/dsl/parse.hpp"
#include "buildevo/dsl/print.hpp"

// A heuristic couples DSL source with its validated tree and provenance.
// Construction always parses the source, so the tree and text cannot drift
// apart.

namespace buildevo {

enum class GeneticOperator { seed, init, crossover, mutation };

inline const char* to_string(GeneticOperator op) {
    switch (op) {
        case GeneticOperator::seed: return "seed";
        case GeneticOperator::init: return "init";
        case GeneticOperator::crossover: return "crossover";
        case GeneticOperator::mutation: return "mutation";
    }
    return "?";
}

struct Lineage {
    GeneticOperator op = GeneticOperator::seed;
    std::vector<std::string> parent_ids;
    bool fallback = false;  // produced by a mechanical fallback, not the provider
};

struct HeuristicProgram {
    std::string id;
    std::string source;
    dsl::Program ast;
    Lineage lineage;
    int generation = 0;
};

// Parses and validates source; throws SyntaxError/ValidationError on bad
// input.
inline HeuristicProgram make_heuristic(std::string id, std::string source,
                                       Lineage lineage = {}, int generation = 0) {
    HeuristicProgram h;
    h.ast = dsl::parse(source);
    h.id = std::move(id);
    h.source = std::move(source);
    h.lineage = std::move(lineage);
    h.generation = generation;
    return h;
}

// Formatting-independent identity, used for archive deduplication.
inline std::string canonical_source(const HeuristicProgram& h) {
    return dsl::print_canonical(h.ast);
}

}  // namespace buildevo
