#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "buildevo/buildevo.hpp"
#include "support/synthetic.hpp"

using namespace buildevo;
namespace fs = std::filesystem;

namespace {

const std::string kCli = BUILDEVO_CLI_PATH;
const std::string kFixtures = BUILDEVO_FIXTURE_DIR;

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("buildevo_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args, const fs::path& scratch,
                  const std::string& env_prefix = "") {
    const fs::path out_path = scratch / "stdout.txt";
    const fs::path err_path = scratch / "stderr.txt";
    const std::string cmd = env_prefix + "\"" + kCli + "\" " + args + " >\"" +
                            out_path.string() + "\" 2>\"" + err_path.string() + "\"";
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

std::string ingest_args(const fs::path& out) {
    return "ingest --metadata \"" + kFixtures + "/cli_metadata.csv\" --weather \"" +
           kFixtures + "/cli_weather.csv\" --meter electricity=\"" + kFixtures +
           "/cli_meters_electricity.csv\" --out \"" + out.string() + "\"";
}

fs::path write_synthetic(const fs::path& scratch, int64_t hours = 1440) {
    testsupport::SyntheticSpec spec;
    spec.hours = hours;
    const fs::path path = scratch / "dataset.json";
    save_dataset(testsupport::make_synthetic_dataset(spec), path.string());
    return path;
}

fs::path write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

int64_t count_missing(const EnergyDataset& ds) {
    int64_t n = 0;
    for (const auto& s : ds.meters)
        for (double v : s.values)
            if (std::isnan(v)) ++n;
    return n;
}

}  // namespace

TEST_CASE("help succeeds while usage errors exit with code 2") {
    const auto scratch = scratch_dir("usage");
    const auto help = run_cli("--help", scratch);
    CHECK(help.code == 0);
    CHECK(help.out.find("ingest") != std::string::npos);
    CHECK(help.out.find("evolve") != std::string::npos);

    CHECK(run_cli("", scratch).code == 2);
    CHECK(run_cli("frobnicate", scratch).code == 2);
    CHECK(run_cli("ingest", scratch).code == 2);  // missing required options
    fs::remove_all(scratch);
}

TEST_CASE("ingest aligns the csv fixtures and reports missingness") {
    const auto scratch = scratch_dir("ingest");
    const fs::path out = scratch / "ds.json";
    const auto r = run_cli(ingest_args(out), scratch);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("buildings: 2, meter series: 2") != std::string::npos);
    CHECK(r.out.find("span: 192 hours") != std::string::npos);
    CHECK(r.out.find("b1/electricity:") != std::string::npos);
    CHECK(r.out.find("wrote " + out.string()) != std::string::npos);

    const EnergyDataset ds = load_dataset_json(out.string());
    CHECK(ds.aligned);
    CHECK(ds.span_hours == 192);
    CHECK(ds.meters.size() == 2);
    CHECK(count_missing(ds) > 0);

    const auto bad_spec = run_cli(
        "ingest --metadata \"" + kFixtures + "/cli_metadata.csv\" --weather \"" +
            kFixtures + "/cli_weather.csv\" --meter electricity --out \"" +
            (scratch / "x.json").string() + "\"",
        scratch);
    CHECK(bad_spec.code == 2);
    CHECK(bad_spec.err.find("TYPE=PATH") != std::string::npos);

    const auto missing = run_cli(
        "ingest --metadata \"" + (scratch / "nope.csv").string() + "\" --weather \"" +
            kFixtures + "/cli_weather.csv\" --meter electricity=\"" + kFixtures +
            "/cli_meters_electricity.csv\" --out \"" + (scratch / "x.json").string() +
            "\"",
        scratch);
    CHECK(missing.code == 2);
    CHECK(missing.err.find("error:") != std::string::npos);
    fs::remove_all(scratch);
}

TEST_CASE("impute eliminates every gap and writes an audit") {
    const auto scratch = scratch_dir("impute");
    const fs::path raw = scratch / "ds.json";
    REQUIRE(run_cli(ingest_args(raw), scratch).code == 0);
    const int64_t gaps = count_missing(load_dataset_json(raw.string()));
    REQUIRE(gaps > 0);

    const fs::path imputed = scratch / "imputed.json";
    const fs::path audit = scratch / "audit.jsonl";
    const auto r = run_cli("impute --dataset \"" + raw.string() + "\" --out \"" +
                               imputed.string() + "\" --audit \"" + audit.string() +
                               "\"",
                           scratch);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("filled " + std::to_string(gaps) + " slot(s)") !=
          std::string::npos);

    CHECK(count_missing(load_dataset_json(imputed.string())) == 0);

    int64_t audit_lines = 0;
    for (const auto& line : split(slurp(audit), '\n')) {
        if (trim(line).empty()) continue;
        ++audit_lines;
        const auto j = nlohmann::json::parse(line);
        for (const char* key :
             {"building_id", "meter_type", "hour", "method", "value", "detail"})
            CHECK(j.contains(key));
    }
    CHECK(audit_lines == gaps);

    CHECK(run_cli("impute --dataset \"" + (scratch / "nope.json").string() +
                      "\" --out \"" + (scratch / "x.json").string() + "\"",
                  scratch)
              .code == 2);
    fs::remove_all(scratch);
}

TEST_CASE("eval prints the metric triple for heuristics and baselines") {
    const auto scratch = scratch_dir("eval");
    const fs::path ds = write_synthetic(scratch);
    const fs::path heuristic =
        write_text(scratch / "daily.dsl", "segment daily { lag(24) }\n");
    const std::string base = "eval --dataset \"" + ds.string() + "\"";

    const auto h = run_cli(base + " --heuristic \"" + heuristic.string() + "\"", scratch);
    CAPTURE(h.err);
    REQUIRE(h.code == 0);
    CHECK(h.out.find("daily on ") != std::string::npos);
    CHECK(h.out.find(" test window(s)") != std::string::npos);
    CHECK(h.out.find("MAPE / RMSE / MAE: ") != std::string::npos);
    CHECK(h.out.find("J (rmse): ") != std::string::npos);
    CHECK(h.out.find("failed windows: 0/") != std::string::npos);

    CHECK(run_cli(base + " --baseline persistence", scratch).code == 0);
    CHECK(run_cli(base + " --baseline linear_regression", scratch).code == 0);
    CHECK(run_cli(base + " --split train --baseline global_mean", scratch).code == 0);

    const auto mape = run_cli(base + " --objective mape --baseline persistence", scratch);
    CHECK(mape.out.find("J (mape): ") != std::string::npos);

    const auto both = run_cli(base + " --heuristic \"" + heuristic.string() +
                                  "\" --baseline persistence",
                              scratch);
    CHECK(both.code == 2);
    CHECK(both.err.find("exactly one") != std::string::npos);
    CHECK(run_cli(base, scratch).code == 2);  // neither
    const auto unknown = run_cli(base + " --baseline nope", scratch);
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("unknown baseline") != std::string::npos);
    CHECK(run_cli(base + " --split sideways --baseline persistence", scratch).code == 2);

    const fs::path result = scratch / "result.json";
    REQUIRE(run_cli(base + " --heuristic \"" + heuristic.string() + "\" --out \"" +
                        result.string() + "\"",
                    scratch)
                .code == 0);
    const auto j = nlohmann::json::parse(slurp(result));
    CHECK(j.at("objective") == "rmse");
    CHECK(j.at("windows_total").get<int64_t>() > 0);
    CHECK(j.at("windows_failed").get<int64_t>() == 0);
    CHECK(j.at("J").is_number());
    CHECK(j.at("per_building").contains("b1"));
    fs::remove_all(scratch);
}

TEST_CASE("evolve writes a deterministic run directory") {
    const auto scratch = scratch_dir("evolve");
    const fs::path ds = write_synthetic(scratch);
    const std::string base = "evolve --dataset \"" + ds.string() +
                             "\" --provider mock --n 4 --generations 2 --seed 11 "
                             "--out \"" +
                             (scratch / "runs").string() + "\"";

    const auto a = run_cli(base + " --run-id runA", scratch);
    CAPTURE(a.err);
    REQUIRE(a.code == 0);
    CHECK(a.out.find("run: ") != std::string::npos);
    CHECK(a.out.find("best J (rmse, train): ") != std::string::npos);

    const fs::path dir = scratch / "runs" / "runA";
    for (const char* name : {"config.json", "generations.jsonl", "reflections.jsonl",
                             "archive.json", "best.dsl", "pifl.json", "baselines.json",
                             "report.md"})
        CHECK(fs::exists(dir / name));

    const auto config = nlohmann::json::parse(slurp(dir / "config.json"));
    CHECK(config.at("seed") == 11);
    CHECK(config.at("provider") == "mock");
    CHECK(config.at("n") == 4);

    const auto rows = parse_generations_jsonl(slurp(dir / "generations.jsonl"));
    CHECK(rows.size() == 12);  // 4 members x (1 + 2 generations)

    const std::string report = slurp(dir / "report.md");
    CHECK(report.find("# Evolution run report") == 0);
    for (const char* needle : {"evolved_best", "persistence", "seasonal_naive_24",
                               "seasonal_naive_168", "global_mean", "linear_regression"})
        CHECK(report.find(needle) != std::string::npos);

    // Same seed, same ledger bytes.
    REQUIRE(run_cli(base + " --run-id runB", scratch).code == 0);
    const fs::path dir_b = scratch / "runs" / "runB";
    CHECK(slurp(dir / "generations.jsonl") == slurp(dir_b / "generations.jsonl"));
    CHECK(slurp(dir / "reflections.jsonl") == slurp(dir_b / "reflections.jsonl"));
    CHECK(slurp(dir / "best.dsl") == slurp(dir_b / "best.dsl"));

    // Attribution off leaves an empty pifl.json behind.
    REQUIRE(run_cli(base + " --run-id runC --no-pifl", scratch).code == 0);
    CHECK(slurp(scratch / "runs" / "runC" / "pifl.json") == "{}\n");
    fs::remove_all(scratch);
}

TEST_CASE("report re-renders byte-identically") {
    const auto scratch = scratch_dir("report");
    const fs::path ds = write_synthetic(scratch);
    REQUIRE(run_cli("evolve --dataset \"" + ds.string() +
                        "\" --provider mock --n 3 --generations 1 --seed 5 "
                        "--out \"" +
                        (scratch / "runs").string() + "\" --run-id runR",
                    scratch)
                .code == 0);
    const fs::path dir = scratch / "runs" / "runR";
    const std::string before = slurp(dir / "report.md");
    REQUIRE(!before.empty());
    fs::remove(dir / "report.md");

    const auto r = run_cli("report --run \"" + dir.string() + "\"", scratch);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("wrote ") != std::string::npos);
    CHECK(slurp(dir / "report.md") == before);

    CHECK(run_cli("report --run \"" + (scratch / "absent").string() + "\"", scratch)
              .code == 2);
    fs::remove_all(scratch);
}

TEST_CASE("pifl ranks segments from the command line") {
    const auto scratch = scratch_dir("pifl");
    const fs::path ds = write_synthetic(scratch);
    const fs::path heuristic = write_text(
        scratch / "twoseg.dsl",
        "segment base { lag(24) }\nsegment weather { cdd(18) * 0.5 }\n");

    const auto r = run_cli("pifl --dataset \"" + ds.string() + "\" --heuristic \"" +
                               heuristic.string() + "\" --out \"" +
                               (scratch / "pifl.json").string() + "\"",
                           scratch);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Segment contribution report (J=") == 0);
    CHECK(r.out.find("- base: ablation_delta_J=") != std::string::npos);
    CHECK(r.out.find("- weather: ablation_delta_J=") != std::string::npos);

    const auto j = nlohmann::json::parse(slurp(scratch / "pifl.json"));
    CHECK(j.at("heuristic_id") == "twoseg");
    REQUIRE(j.at("segments").size() == 2);
    for (const auto& s : j.at("segments")) {
        CHECK(s.contains("ablation_delta_J"));
        CHECK(s.contains("abs_share"));
        CHECK(s.contains("flagged"));
    }

    CHECK(run_cli("pifl --dataset \"" + ds.string() + "\"", scratch).code == 2);
    fs::remove_all(scratch);
}

TEST_CASE("the http provider refuses to start without an api key") {
    const auto scratch = scratch_dir("httpkey");
    const fs::path ds = write_synthetic(scratch);
    const auto r = run_cli("evolve --dataset \"" + ds.string() +
                               "\" --provider http --n 2 --generations 1 --out \"" +
                               (scratch / "runs").string() + "\"",
                           scratch, "env BUILDEVO_API_KEY= ");
    CHECK(r.code == 3);
    CHECK(r.err.find("BUILDEVO_API_KEY") != std::string::npos);
    fs::remove_all(scratch);
}
