#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "buildevo/common.hpp"
#include "buildevo/evaluation.hpp"
#include "buildevo/evolution.hpp"
#include "buildevo/timeutil.hpp"

// Run-directory persistence. Every file is written through ordered_json (or
// plain text) with fixed key order and shortest-round-trip numbers, so two
// runs with the same seed produce byte-identical ledgers. Non-finite J values
// serialize as JSON null and read back as infinity.

namespace buildevo {

struct MalformedLedger : std::runtime_error {
    explicit MalformedLedger(const std::string& why)
        : std::runtime_error("malformed ledger: " + why) {}
};

namespace ledgerdetail {

inline nlohmann::ordered_json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline double number_or_inf(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw MalformedLedger(std::string("missing key ") + key);
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw MalformedLedger(std::string(key) + " is not a number");
    return v.get<double>();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MalformedLedger("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw MalformedLedger("short write to " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedLedger("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ledgerdetail

inline GeneticOperator operator_from_string(std::string_view s) {
    if (s == "seed") return GeneticOperator::seed;
    if (s == "init") return GeneticOperator::init;
    if (s == "crossover") return GeneticOperator::crossover;
    if (s == "mutation") return GeneticOperator::mutation;
    throw MalformedLedger("unknown operator '" + std::string(s) + "'");
}

// ── generations.jsonl ───────────────────────────────────────────

inline nlohmann::ordered_json candidate_to_json(const CandidateRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["generation"] = r.generation;
    j["operator"] = to_string(r.op);
    j["parent_ids"] = r.parent_ids;
    j["source"] = r.source;
    j["J"] = ledgerdetail::finite_or_null(r.J);
    j["rmse"] = ledgerdetail::finite_or_null(r.rmse);
    j["mae"] = ledgerdetail::finite_or_null(r.mae);
    j["mape"] = ledgerdetail::finite_or_null(r.mape);
    j["windows_failed"] = r.windows_failed;
    j["fallback"] = r.fallback;
    return j;
}

inline std::string generations_jsonl(const std::vector<CandidateRecord>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += candidate_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<CandidateRecord> parse_generations_jsonl(const std::string& text) {
    std::vector<CandidateRecord> out;
    size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw MalformedLedger("generations.jsonl line " + std::to_string(line_no) +
                                  ": " + e.what());
        }
        try {
            CandidateRecord r;
            r.id = j.at("id").get<std::string>();
            r.generation = j.at("generation").get<int>();
            r.op = operator_from_string(j.at("operator").get<std::string>());
            r.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
            r.source = j.at("source").get<std::string>();
            r.J = ledgerdetail::number_or_inf(j, "J");
            r.rmse = ledgerdetail::number_or_inf(j, "rmse");
            r.mae = ledgerdetail::number_or_inf(j, "mae");
            r.mape = ledgerdetail::number_or_inf(j, "mape");
            r.windows_failed = j.at("windows_failed").get<int64_t>();
            r.fallback = j.at("fallback").get<bool>();
            out.push_back(std::move(r));
        } catch (const MalformedLedger&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedLedger("generations.jsonl line " + std::to_string(line_no) +
                                  ": " + e.what());
        }
    }
    return out;
}

// ── reflections.jsonl ───────────────────────────────────────────

inline std::string reflections_jsonl(const std::vector<ReflectionRecord>& rows) {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["generation"] = r.generation;
        j["kind"] = r.kind;
        j["text"] = r.text;
        if (r.kind == "short") j["pair_ids"] = r.pair_ids;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ReflectionRecord> parse_reflections_jsonl(const std::string& text) {
    std::vector<ReflectionRecord> out;
    size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ReflectionRecord r;
            r.generation = j.at("generation").get<int>();
            r.kind = j.at("kind").get<std::string>();
            r.text = j.at("text").get<std::string>();
            if (j.contains("pair_ids"))
                r.pair_ids = j.at("pair_ids").get<std::vector<std::string>>();
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw MalformedLedger("reflections.jsonl line " + std::to_string(line_no) +
                                  ": " + e.what());
        }
    }
    return out;
}

// ── archive.json ────────────────────────────────────────────────

inline nlohmann::ordered_json archive_to_json(const EliteArchive& archive) {
    nlohmann::ordered_json j;
    j["capacity"] = archive.capacity();
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : archive.entries()) {
        nlohmann::ordered_json entry;
        entry["id"] = e.id;
        entry["source"] = e.source;
        entry["J"] = ledgerdetail::finite_or_null(e.J);
        entry["generation"] = e.generation;
        j["entries"].push_back(std::move(entry));
    }
    return j;
}

// ── Whole-run writing ───────────────────────────────────────────

struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path config() const { return dir / "config.json"; }
    std::filesystem::path generations() const { return dir / "generations.jsonl"; }
    std::filesystem::path reflections() const { return dir / "reflections.jsonl"; }
    std::filesystem::path archive() const { return dir / "archive.json"; }
    std::filesystem::path best() const { return dir / "best.dsl"; }
    std::filesystem::path pifl() const { return dir / "pifl.json"; }
    std::filesystem::path baselines() const { return dir / "baselines.json"; }
    std::filesystem::path report() const { return dir / "report.md"; }
};

inline nlohmann::ordered_json run_config_json(const EvolutionConfig& cfg,
                                              const WindowConfig& windows,
                                              const std::string& provider_name) {
    nlohmann::ordered_json j;
    j["n"] = cfg.n;
    j["generations"] = cfg.generations;
    j["t_obs"] = windows.t_obs;
    j["t_pred"] = windows.t_pred;
    j["stride"] = windows.stride;
    j["objective"] = to_string(cfg.objective);
    j["tau"] = cfg.tau;
    j["mutation_count"] = cfg.resolved_mutation_count();
    j["archive_capacity"] = cfg.archive_capacity;
    j["train_frac"] = windows.train_frac;
    j["seed"] = cfg.seed;
    j["use_pifl"] = cfg.use_pifl;
    j["provider"] = provider_name;
    return j;
}

// Directory name for a run: UTC timestamp plus four hex digits of the config
// hash. Names files only; ledger contents never include it.
inline std::string make_run_id(int64_t utc_epoch_seconds,
                               const nlohmann::ordered_json& config) {
    const int64_t hour = timeutil::floor_div(utc_epoch_seconds, 3600);
    const timeutil::Civil c = timeutil::civil_from_hour(hour);
    const int64_t rem = utc_epoch_seconds - hour * 3600;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", c.year, c.month,
                  c.day, c.hour, static_cast<int>(rem / 60),
                  static_cast<int>(rem % 60));
    const uint64_t h = fnv1a(config.dump());
    char hex[8];
    std::snprintf(hex, sizeof(hex), "%04x", static_cast<unsigned>(h & 0xffffu));
    return std::string(buf) + "-" + hex;
}

inline void write_run_ledger(const RunPaths& paths, const RunResult& run,
                             const nlohmann::ordered_json& config,
                             const nlohmann::ordered_json& pifl_json,
                             const nlohmann::ordered_json& baselines_json) {
    std::filesystem::create_directories(paths.dir);
    ledgerdetail::write_file(paths.config(), config.dump(1) + "\n");
    ledgerdetail::write_file(paths.generations(), generations_jsonl(run.candidates));
    ledgerdetail::write_file(paths.reflections(), reflections_jsonl(run.reflections));
    ledgerdetail::write_file(paths.archive(), archive_to_json(run.archive).dump(1) + "\n");
    ledgerdetail::write_file(paths.best(), run.best.program.source + "\n");
    ledgerdetail::write_file(paths.pifl(), pifl_json.dump(1) + "\n");
    ledgerdetail::write_file(paths.baselines(), baselines_json.dump(1) + "\n");
}

}  // namespace buildevo
