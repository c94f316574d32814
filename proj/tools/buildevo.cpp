// buildevo: end-to-end command line for the forecasting-heuristic toolkit.
//
//   ingest   raw CSVs -> aligned hourly dataset JSON
//   impute   fill gaps in an aligned dataset (rule/model/donor/interpolation)
//   evolve   provider-driven evolution run; writes a run directory
//   eval     score a heuristic or baseline; prints MAPE / RMSE / MAE
//   pifl     per-segment ablation attribution for a heuristic
//   report   re-render report.md from an existing run directory
//
// Exit codes: 0 success, 2 usage or data errors, 3 provider errors.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "buildevo/buildevo.hpp"
#include "buildevo/http_transport.hpp"

namespace {

using namespace buildevo;

constexpr int kExitOk = 0;
constexpr int kExitUsageOrData = 2;
constexpr int kExitProvider = 3;

int g_log_level = 1;  // 0=debug 1=info 2=warn 3=error

void log_at(int level, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= g_log_level)
        std::cerr << "[" << names[level] << "] " << msg << "\n";
}

void log_debug(const std::string& m) { log_at(0, m); }
void log_info(const std::string& m) { log_at(1, m); }
void log_warn(const std::string& m) { log_at(2, m); }

struct ProviderSetupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text_file_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_or_throw(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw DatasetError("short write to " + path);
}

std::set<std::string> comma_set(const std::string& csv) {
    std::set<std::string> out;
    for (const auto& part : split(csv, ','))
        if (!trim(part).empty()) out.insert(std::string(trim(part)));
    return out;
}

std::vector<ForecastWindow> filter_windows(std::vector<ForecastWindow> windows,
                                           const std::set<std::string>& keep) {
    if (keep.empty()) return windows;
    std::vector<ForecastWindow> out;
    for (auto& w : windows)
        if (keep.count(w.building_id)) out.push_back(std::move(w));
    return out;
}

Objective parse_objective(const std::string& name) {
    if (auto o = objective_from_string(name)) return *o;
    throw DatasetError("unknown objective '" + name + "'");
}

HeuristicProgram load_heuristic_file(const std::string& path) {
    std::string source = read_text_file_or_throw(path);
    while (!source.empty() && (source.back() == '\n' || source.back() == '\r'))
        source.pop_back();
    return make_heuristic(std::filesystem::path(path).stem().string(), source);
}

std::string metrics_triple(const EvaluationResult& r) {
    return "MAPE / RMSE / MAE: " + format_double(r.mape) + " / " +
           format_double(r.rmse) + " / " + format_double(r.mae);
}

nlohmann::ordered_json result_to_json(const EvaluationResult& r, Objective objective) {
    nlohmann::ordered_json j;
    j["objective"] = to_string(objective);
    j["J"] = ledgerdetail::finite_or_null(r.J);
    j["rmse"] = ledgerdetail::finite_or_null(r.rmse);
    j["mae"] = ledgerdetail::finite_or_null(r.mae);
    j["mape"] = ledgerdetail::finite_or_null(r.mape);
    j["windows_total"] = r.windows_total;
    j["windows_failed"] = r.windows_failed;
    j["per_building"] = nlohmann::ordered_json::object();
    for (const auto& [bid, m] : r.per_building) {
        nlohmann::ordered_json b;
        b["rmse"] = ledgerdetail::finite_or_null(m.rmse);
        b["mae"] = ledgerdetail::finite_or_null(m.mae);
        b["mape"] = ledgerdetail::finite_or_null(m.mape);
        j["per_building"][bid] = std::move(b);
    }
    return j;
}

// Shared window-option block for evolve/eval/pifl.
struct WindowOpts {
    WindowConfig wc;

    void attach(CLI::App* cmd) {
        cmd->add_option("--t-obs", wc.t_obs, "observed history hours per window");
        cmd->add_option("--t-pred", wc.t_pred, "forecast horizon hours per window");
        cmd->add_option("--stride", wc.stride, "hours between window starts");
        cmd->add_option("--train-frac", wc.train_frac,
                        "chronological train split fraction (0, 1)");
    }
};

// ── ingest ──────────────────────────────────────────────────────

struct IngestArgs {
    std::string metadata, weather, out;
    std::vector<std::string> meters;
};

int run_ingest(const IngestArgs& a) {
    std::map<MeterType, std::string> meter_paths;
    for (const auto& spec : a.meters) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos)
            throw DatasetError("--meter expects TYPE=PATH, got '" + spec + "'");
        const std::string type_name = spec.substr(0, eq);
        const auto type = meter_type_from_string(type_name);
        if (!type) throw DatasetError("unknown meter type '" + type_name + "'");
        meter_paths[*type] = spec.substr(eq + 1);
    }
    LoadReport report;
    EnergyDataset raw = load_dataset(a.metadata, a.weather, meter_paths, report);
    for (const auto& w : report.warnings) log_warn(w);
    if (report.dropped_rows > 0)
        log_info("dropped " + std::to_string(report.dropped_rows) + " malformed row(s)");
    EnergyDataset ds = align_and_resample(raw);
    save_dataset(ds, a.out);

    std::cout << "buildings: " << ds.buildings.size()
              << ", meter series: " << ds.meters.size() << ", span: " << ds.span_hours
              << " hours\n";
    for (const auto& m : missingness_report(ds)) {
        std::cout << m.building_id << "/" << to_string(m.meter_type) << ": "
                  << format_double(m.missing_pct) << "% missing, longest gap "
                  << m.longest_gap << "h\n";
    }
    std::cout << "wrote " << a.out << "\n";
    return kExitOk;
}

// ── impute ──────────────────────────────────────────────────────

struct ImputeArgs {
    std::string dataset, out, holidays, audit;
    bool irrigation_winter_zero = false;
};

int run_impute(const ImputeArgs& a) {
    EnergyDataset ds = load_dataset_json(a.dataset);
    ImputationConfig cfg;
    cfg.irrigation_winter_zero = a.irrigation_winter_zero;
    if (!a.holidays.empty()) cfg.holidays = load_holiday_dates(a.holidays);
    auto [imputed, audit] = impute_all(ds, cfg);
    for (const auto& w : audit.warnings) log_warn(w);
    save_dataset(imputed, a.out);

    std::map<std::string, int64_t> by_method;
    for (const auto& r : audit.records) ++by_method[to_string(r.method)];
    std::cout << "filled " << audit.records.size() << " slot(s)";
    for (const auto& [method, count] : by_method)
        std::cout << ", " << method << ": " << count;
    std::cout << "\n";

    if (!a.audit.empty()) {
        std::string lines;
        for (const auto& r : audit.records) {
            nlohmann::ordered_json j;
            j["building_id"] = r.building_id;
            j["meter_type"] = to_string(r.meter_type);
            j["hour"] = r.hour;
            j["method"] = to_string(r.method);
            j["value"] = ledgerdetail::finite_or_null(r.value);
            j["detail"] = r.detail;
            lines += j.dump();
            lines += '\n';
        }
        write_text_file_or_throw(a.audit, lines);
        std::cout << "audit: " << a.audit << "\n";
    }
    std::cout << "wrote " << a.out << "\n";
    return kExitOk;
}

// ── evolve ──────────────────────────────────────────────────────

struct EvolveArgs {
    std::string dataset, provider = "mock", out_dir = "runs", prompts_dir = "prompts";
    std::string objective = "rmse", train_buildings, run_id;
    WindowOpts windows;
    EvolutionConfig cfg;
    bool no_pifl = false;
};

std::unique_ptr<Provider> make_provider(const std::string& name, uint64_t seed) {
    if (name == "mock") return std::make_unique<MockProvider>(seed);
    if (name == "http") {
        HttpProviderConfig cfg = HttpProviderConfig::from_env();
        if (cfg.api_key.empty())
            throw ProviderSetupError(
                "BUILDEVO_API_KEY is not set; the http provider needs it");
        return std::make_unique<HttpProvider>(std::move(cfg), make_httplib_transport());
    }
    throw DatasetError("unknown provider '" + name + "' (expected mock or http)");
}

int run_evolve(EvolveArgs& a, unsigned threads) {
    a.cfg.objective = parse_objective(a.objective);
    a.cfg.use_pifl = !a.no_pifl;
    a.cfg.threads = threads;
    std::unique_ptr<Provider> provider = make_provider(a.provider, a.cfg.seed);

    EnergyDataset ds = load_dataset_json(a.dataset);
    WindowSet ws = make_windows(ds, a.windows.wc);
    const auto keep = comma_set(a.train_buildings);
    ws.train = filter_windows(std::move(ws.train), keep);
    ws.test = filter_windows(std::move(ws.test), keep);
    if (ws.train.empty()) throw DatasetError("no training windows after filtering");
    const MetadataIndex meta = metadata_index(ds);
    log_info("train windows: " + std::to_string(ws.train.size()) +
             ", test windows: " + std::to_string(ws.test.size()));

    const PromptTemplates templates = load_templates(a.prompts_dir);
    const RunResult run = run_evolution(a.cfg, ws.train, meta, *provider, templates);

    // Ledger + report.
    const nlohmann::ordered_json config =
        run_config_json(a.cfg, a.windows.wc, provider->name());
    const int64_t now_sec = std::chrono::duration_cast<std::chrono::seconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    const std::string run_id =
        a.run_id.empty() ? make_run_id(now_sec, config) : a.run_id;
    RunPaths paths{std::filesystem::path(a.out_dir) / run_id};

    const ObjectiveConfig obj_cfg{a.cfg.objective, a.cfg.fail_threshold};
    nlohmann::ordered_json pifl_json = nlohmann::ordered_json::object();
    if (a.cfg.use_pifl && run.best.result.executable()) {
        try {
            pifl_json = pifl_report_json(
                analyze(run.best.program, ws.train, meta, obj_cfg, threads));
        } catch (const NonExecutable&) {
        }
    }

    nlohmann::ordered_json baselines = nlohmann::ordered_json::object();
    baselines["windows"] = "test";
    baselines["rows"] = nlohmann::ordered_json::array();
    auto add_row = [&](const std::string& name, const EvaluationResult& r) {
        nlohmann::ordered_json row;
        row["name"] = name;
        row["mape"] = ledgerdetail::finite_or_null(r.mape);
        row["rmse"] = ledgerdetail::finite_or_null(r.rmse);
        row["mae"] = ledgerdetail::finite_or_null(r.mae);
        row["windows_failed"] = r.windows_failed;
        row["windows_total"] = r.windows_total;
        baselines["rows"].push_back(std::move(row));
    };
    if (!ws.test.empty()) {
        add_row("evolved_best", score_heuristic(run.best.program.ast, ws.test, meta,
                                                obj_cfg, threads));
        for (Baseline b : {Baseline::persistence, Baseline::seasonal_naive_24,
                           Baseline::seasonal_naive_168, Baseline::global_mean}) {
            add_row(to_string(b), score_heuristic(dsl::parse(baseline_program(b)),
                                                  ws.test, meta, obj_cfg, threads));
        }
        add_row("linear_regression",
                score_linear_regression(ws.train, ws.test, meta,
                                        make_feature_spec(ds), obj_cfg));
    }

    write_run_ledger(paths, run, config, pifl_json, baselines);
    write_text_file_or_throw(paths.report().string(), render_report_from_dir(paths));

    std::cout << "run: " << paths.dir.string() << "\n";
    std::cout << "best J (" << to_string(a.cfg.objective)
              << ", train): " << format_double(run.best.result.J) << " by "
              << run.best.program.id << "\n";
    std::cout << run.best.program.source << "\n";
    return kExitOk;
}

// ── eval ────────────────────────────────────────────────────────

struct EvalArgs {
    std::string dataset, heuristic, baseline, out;
    std::string objective = "rmse", split = "test", test_buildings;
    WindowOpts windows;
};

int run_eval(const EvalArgs& a, unsigned threads) {
    if (a.heuristic.empty() == a.baseline.empty())
        throw DatasetError("pass exactly one of --heuristic or --baseline");
    const Objective objective = parse_objective(a.objective);
    EnergyDataset ds = load_dataset_json(a.dataset);
    WindowSet ws = make_windows(ds, a.windows.wc);
    const auto keep = comma_set(a.test_buildings);
    ws.train = filter_windows(std::move(ws.train), keep);
    ws.test = filter_windows(std::move(ws.test), keep);
    std::vector<ForecastWindow> scored = a.split == "train" ? ws.train : ws.test;
    if (a.split == "all") {
        scored = ws.train;
        scored.insert(scored.end(), ws.test.begin(), ws.test.end());
    }
    if (scored.empty()) throw DatasetError("no windows to evaluate");
    const MetadataIndex meta = metadata_index(ds);
    const ObjectiveConfig obj_cfg{objective, 0.1};

    EvaluationResult result;
    std::string label;
    if (!a.heuristic.empty()) {
        const HeuristicProgram h = load_heuristic_file(a.heuristic);
        label = h.id;
        result = score_heuristic(h.ast, scored, meta, obj_cfg, threads);
    } else if (a.baseline == "linear_regression") {
        if (ws.train.empty())
            throw DatasetError("linear_regression needs training windows");
        label = a.baseline;
        result = score_linear_regression(ws.train, scored, meta,
                                         make_feature_spec(ds), obj_cfg);
    } else {
        const auto b = baseline_from_string(a.baseline);
        if (!b) throw DatasetError("unknown baseline '" + a.baseline + "'");
        label = a.baseline;
        result = score_heuristic(dsl::parse(baseline_program(*b)), scored, meta,
                                 obj_cfg, threads);
    }

    std::cout << label << " on " << scored.size() << " " << a.split << " window(s)\n";
    std::cout << metrics_triple(result) << "\n";
    std::cout << "J (" << to_string(objective) << "): " << format_double(result.J)
              << ", failed windows: " << result.windows_failed << "/"
              << result.windows_total << "\n";
    if (!a.out.empty()) {
        write_text_file_or_throw(a.out, result_to_json(result, objective).dump(1) + "\n");
        std::cout << "wrote " << a.out << "\n";
    }
    return kExitOk;
}

// ── pifl ────────────────────────────────────────────────────────

struct PiflArgs {
    std::string dataset, heuristic, out;
    std::string objective = "rmse", split = "test", buildings;
    WindowOpts windows;
};

int run_pifl(const PiflArgs& a, unsigned threads) {
    const Objective objective = parse_objective(a.objective);
    EnergyDataset ds = load_dataset_json(a.dataset);
    WindowSet ws = make_windows(ds, a.windows.wc);
    const auto keep = comma_set(a.buildings);
    std::vector<ForecastWindow> scored =
        filter_windows(a.split == "train" ? std::move(ws.train) : std::move(ws.test),
                       keep);
    if (scored.empty()) throw DatasetError("no windows to evaluate");
    const MetadataIndex meta = metadata_index(ds);
    const HeuristicProgram h = load_heuristic_file(a.heuristic);

    const PiflReport report =
        analyze(h, scored, meta, ObjectiveConfig{objective, 0.1}, threads);
    std::cout << report.rendered_text;
    if (!a.out.empty()) {
        write_text_file_or_throw(a.out, pifl_report_json(report).dump(1) + "\n");
        std::cout << "wrote " << a.out << "\n";
    }
    return kExitOk;
}

// ── report ──────────────────────────────────────────────────────

int run_report(const std::string& run_dir) {
    RunPaths paths{run_dir};
    const std::string md = render_report_from_dir(paths);
    write_text_file_or_throw(paths.report().string(), md);
    std::cout << "wrote " << paths.report().string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolves and evaluates interpretable building-energy forecasting "
                 "heuristics"};
    app.require_subcommand(1);
    unsigned threads = 1;
    std::string log_level = "info";
    app.add_option("--threads", threads, "worker threads for scoring")
        ->check(CLI::Range(1u, 256u));
    app.add_option("--log-level", log_level, "debug, info, warn, or error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    IngestArgs ingest;
    auto* cmd_ingest = app.add_subcommand("ingest", "load raw CSVs into a dataset");
    cmd_ingest->add_option("--metadata", ingest.metadata, "building metadata CSV")
        ->required();
    cmd_ingest->add_option("--weather", ingest.weather, "site weather CSV")->required();
    cmd_ingest
        ->add_option("--meter", ingest.meters,
                     "meter readings as TYPE=PATH (repeatable)")
        ->required();
    cmd_ingest->add_option("--out", ingest.out, "output dataset JSON")->required();

    ImputeArgs impute;
    auto* cmd_impute = app.add_subcommand("impute", "fill gaps in a dataset");
    cmd_impute->add_option("--dataset", impute.dataset, "aligned dataset JSON")
        ->required();
    cmd_impute->add_option("--out", impute.out, "output dataset JSON")->required();
    cmd_impute->add_option("--holidays", impute.holidays,
                           "holiday dates file (YYYY-MM-DD lines)");
    cmd_impute->add_option("--audit", impute.audit, "write audit JSONL here");
    cmd_impute->add_flag("--irrigation-winter-zero", impute.irrigation_winter_zero,
                         "zero-fill irrigation meters in December-February");

    EvolveArgs evolve;
    auto* cmd_evolve = app.add_subcommand("evolve", "run heuristic evolution");
    cmd_evolve->add_option("--dataset", evolve.dataset, "imputed dataset JSON")
        ->required();
    cmd_evolve->add_option("--provider", evolve.provider, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd_evolve->add_option("--n", evolve.cfg.n, "population size");
    cmd_evolve->add_option("--generations", evolve.cfg.generations,
                           "offspring generations");
    cmd_evolve->add_option("--seed", evolve.cfg.seed, "run seed");
    cmd_evolve->add_option("--objective", evolve.objective, "rmse, mae, or mape");
    cmd_evolve->add_option("--tau", evolve.cfg.tau, "archive softmax temperature");
    cmd_evolve->add_option("--mutation-count", evolve.cfg.mutation_count,
                           "mutations per generation (-1 = N/4)");
    cmd_evolve->add_option("--archive-capacity", evolve.cfg.archive_capacity,
                           "elite archive capacity");
    cmd_evolve->add_flag("--no-pifl", evolve.no_pifl,
                         "disable segment attribution in mutation prompts");
    cmd_evolve->add_option("--train-buildings", evolve.train_buildings,
                           "comma-separated building ids to keep");
    cmd_evolve->add_option("--out", evolve.out_dir, "runs directory");
    cmd_evolve->add_option("--run-id", evolve.run_id,
                           "fixed run directory name (default: timestamp-hash)");
    cmd_evolve->add_option("--prompts", evolve.prompts_dir,
                           "prompt template directory");
    evolve.windows.attach(cmd_evolve);

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "score a heuristic or baseline");
    cmd_eval->add_option("--dataset", eval.dataset, "imputed dataset JSON")->required();
    cmd_eval->add_option("--heuristic", eval.heuristic, "heuristic program file");
    cmd_eval->add_option("--baseline", eval.baseline,
                         "persistence, seasonal_naive_24, seasonal_naive_168, "
                         "global_mean, or linear_regression");
    cmd_eval->add_option("--objective", eval.objective, "rmse, mae, or mape");
    cmd_eval->add_option("--split", eval.split, "train, test, or all")
        ->check(CLI::IsMember({"train", "test", "all"}));
    cmd_eval->add_option("--test-buildings", eval.test_buildings,
                         "comma-separated building ids to keep");
    cmd_eval->add_option("--out", eval.out, "write result JSON here");
    eval.windows.attach(cmd_eval);

    PiflArgs pifl;
    auto* cmd_pifl = app.add_subcommand("pifl", "per-segment ablation attribution");
    cmd_pifl->add_option("--dataset", pifl.dataset, "imputed dataset JSON")->required();
    cmd_pifl->add_option("--heuristic", pifl.heuristic, "heuristic program file")
        ->required();
    cmd_pifl->add_option("--objective", pifl.objective, "rmse, mae, or mape");
    cmd_pifl->add_option("--split", pifl.split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    cmd_pifl->add_option("--buildings", pifl.buildings,
                         "comma-separated building ids to keep");
    cmd_pifl->add_option("--out", pifl.out, "write attribution JSON here");
    pifl.windows.attach(cmd_pifl);

    std::string report_dir;
    auto* cmd_report = app.add_subcommand("report", "re-render report.md for a run");
    cmd_report->add_option("--run", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsageOrData;
    }
    g_log_level = log_level == "debug"  ? 0
                  : log_level == "warn" ? 2
                  : log_level == "error" ? 3
                                         : 1;
    log_debug("threads: " + std::to_string(threads));

    try {
        if (cmd_ingest->parsed()) return run_ingest(ingest);
        if (cmd_impute->parsed()) return run_impute(impute);
        if (cmd_evolve->parsed()) return run_evolve(evolve, threads);
        if (cmd_eval->parsed()) return run_eval(eval, threads);
        if (cmd_pifl->parsed()) return run_pifl(pifl, threads);
        if (cmd_report->parsed()) return run_report(report_dir);
    } catch (const ProviderSetupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const ProviderUnavailable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const ResponseEmpty& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsageOrData;
    }
    return kExitUsageOrData;
}
