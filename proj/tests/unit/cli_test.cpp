#include "generators.hpp"
#include "pnnl/cli/commands.hpp"
#include "pnnl/cli/report_io.hpp"
#include "pnnl/cli/run_config.hpp"
#include "pnnl/errors.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pnnl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kDataDir = PNNL_TEST_DATA_DIR;
const fs::path kToyCsv = kDataDir / "toy.csv";

json toy_config() {
    return read_json(kDataDir / "toy_config.json");
}

fs::path write_config(const fs::path& dir, json config, const std::string& name = "config.json") {
    if (config.contains("dataset_path") && config["dataset_path"] == "toy.csv")
        config["dataset_path"] = kToyCsv.string();
    const fs::path p = dir / name;
    write_json(config, p);
    return p;
}

struct Captured {
    int code = 0;
    std::string out, err;
};

Captured run_cmd(const fs::path& config, const fs::path& out_dir) {
    std::ostringstream out, err;
    RunOptions o;
    o.config = config;
    o.out_dir = out_dir;
    const int code = cmd_run(o, out, err);
    return {code, out.str(), err.str()};
}

TEST(CliRun, ToyConfigWritesArtifacts) {
    const auto dir = testing::scratch_dir("cli_run");
    const Captured c = run_cmd(write_config(dir, toy_config()), dir / "out");
    ASSERT_EQ(c.code, kExitOk) << c.err;
    EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "model.pmlp"));
    EXPECT_TRUE(fs::exists(dir / "out" / "test_split.pnnl"));
    EXPECT_NE(c.out.find("test_accuracy="), std::string::npos);

    const json report = read_json(dir / "out" / "report.json");
    EXPECT_EQ(report["status"], "completed");
    EXPECT_FALSE(report["config"].contains("output_directory"));

    // The saved model scores its own test split exactly as reported.
    const Evaluation e = evaluate_model_file(dir / "out" / "model.pmlp", dir / "out" / "test_split.pnnl", {});
    EXPECT_EQ(e.accuracy, report["summary"]["test_accuracy"].get<double>());
    EXPECT_EQ(e.loss, report["summary"]["test_loss"].get<double>());
}

TEST(CliRun, QuietSuppressesSummary) {
    const auto dir = testing::scratch_dir("cli_quiet");
    std::ostringstream out, err;
    RunOptions o{write_config(dir, toy_config()), dir / "out", {}, {}, true};
    EXPECT_EQ(cmd_run(o, out, err), kExitOk);
    EXPECT_TRUE(out.str().empty());
}

TEST(CliRun, RerunIsIdenticalUnderWallTimeMask) {
    const auto dir = testing::scratch_dir("cli_rerun");
    const auto cfg = write_config(dir, toy_config());
    ASSERT_EQ(run_cmd(cfg, dir / "a").code, kExitOk);
    ASSERT_EQ(run_cmd(cfg, dir / "b").code, kExitOk);
    const json a = read_json(dir / "a" / "report.json"), b = read_json(dir / "b" / "report.json");
    EXPECT_EQ(mask_wall_time(a), mask_wall_time(b));
    EXPECT_NE(a, json());
}

TEST(CliRun, SeedOverrideChangesRun) {
    const auto dir = testing::scratch_dir("cli_seed");
    const auto cfg = write_config(dir, toy_config());
    std::ostringstream out, err;
    RunOptions o{cfg, dir / "s", 12345u, 2u, true};
    ASSERT_EQ(cmd_run(o, out, err), kExitOk);
    const json r = read_json(dir / "s" / "report.json");
    EXPECT_EQ(r["config"]["base_seed"], 12345u);
    EXPECT_EQ(r["config"]["candidate_jobs"], 2u);
}

TEST(CliRun, MissingDatasetIsDataError) {
    const auto dir = testing::scratch_dir("cli_missing");
    json cfg = toy_config();
    cfg["dataset_path"] = "no_such_file.csv";
    const Captured c = run_cmd(write_config(dir, cfg), dir / "out");
    EXPECT_EQ(c.code, kExitDataError);
    EXPECT_NE(c.err.find("no_such_file.csv"), std::string::npos);
}

TEST(CliRun, ConfigErrors) {
    const auto dir = testing::scratch_dir("cli_config");
    json unknown = toy_config();
    unknown["learning_rate"] = 0.1;
    EXPECT_EQ(run_cmd(write_config(dir, unknown, "a.json"), dir / "o").code, kExitConfigError);

    json wrong_type = toy_config();
    wrong_type["block_size"] = "big";
    EXPECT_EQ(run_cmd(write_config(dir, wrong_type, "b.json"), dir / "o").code, kExitConfigError);

    json bad_strategy = toy_config();
    bad_strategy["strategy"] = "greedy";
    EXPECT_EQ(run_cmd(write_config(dir, bad_strategy, "c.json"), dir / "o").code, kExitConfigError);

    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run_cmd(dir / "broken.json", dir / "o").code, kExitConfigError);
    EXPECT_EQ(run_cmd(dir / "absent.json", dir / "o").code, kExitConfigError);
}

TEST(CliRun, DivergingRunExitsFourWithPartialReport) {
    const auto dir = testing::scratch_dir("cli_diverge");
    json cfg = toy_config();
    cfg["learning_rates"] = {1e308};
    cfg["fine_tune_epochs"] = 0;
    const Captured c = run_cmd(write_config(dir, cfg), dir / "out");
    EXPECT_EQ(c.code, kExitTrainingError);
    const json report = read_json(dir / "out" / "report.json");
    EXPECT_EQ(report["status"], "failed");
    EXPECT_FALSE(report["error"].get<std::string>().empty());
}

TEST(RunConfigParse, DefaultsAndOverrides) {
    const RunConfig c = parse_run_config(json{{"dataset_path", "x.pnnl"}}, "/base");
    EXPECT_EQ(c.dataset_path, fs::path("/base/x.pnnl"));
    EXPECT_EQ(c.progression.block_size, 16u);
    EXPECT_EQ(c.progression.max_blocks_per_layer, 20u);
    EXPECT_EQ(c.progression.max_layers, 3u);
    EXPECT_EQ(c.progression.patience, 3u);
    EXPECT_EQ(c.progression.improvement_epsilon, 0.001);
    EXPECT_TRUE(c.standardize);
    EXPECT_THROW(parse_run_config(json{{"block_size", 4}}, "/"), ConfigError);
    EXPECT_THROW(parse_run_config(json::array(), "/"), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(CliConvert, MatchesCsvAfterQuantization) {
    const auto dir = testing::scratch_dir("cli_convert");
    std::ostringstream out, err;
    ASSERT_EQ(cmd_convert(kToyCsv, "label", dir / "toy.pnnl", out, err), kExitOk) << err.str();
    const Dataset from_csv = load_csv(kToyCsv, ColumnRef{std::string("label")}).dataset;
    EXPECT_EQ(load_binary(dir / "toy.pnnl"), quantize_to_binary32(from_csv));
    ASSERT_EQ(cmd_convert(kToyCsv, "3", dir / "toy3.pnnl", out, err), kExitOk);
    EXPECT_EQ(load_binary(dir / "toy3.pnnl"), load_binary(dir / "toy.pnnl"));
}

TEST(CliConvert, ThreeRowFileSize) {
    const auto dir = testing::scratch_dir("cli_size");
    std::ofstream(dir / "three.csv") << "a,b,c,y\n1,2,3,0\n4,5,6,1\n7,8,9,1\n";
    std::ostringstream out, err;
    ASSERT_EQ(cmd_convert(dir / "three.csv", "y", dir / "three.pnnl", out, err), kExitOk);
    EXPECT_EQ(fs::file_size(dir / "three.pnnl"), 4u + 2u + 12u + 3u * 3u * 4u + 3u * 4u);
}

TEST(CliConvert, HeaderOnlyCsvFails) {
    const auto dir = testing::scratch_dir("cli_header");
    std::ofstream(dir / "h.csv") << "a,y\n";
    std::ostringstream out, err;
    EXPECT_EQ(cmd_convert(dir / "h.csv", "y", dir / "h.pnnl", out, err), kExitDataError);
    EXPECT_FALSE(fs::exists(dir / "h.pnnl"));
}

TEST(CliConvert, ColumnRefParsing) {
    EXPECT_EQ(parse_column_ref("12"), ColumnRef{std::size_t{12}});
    EXPECT_EQ(parse_column_ref("label"), ColumnRef{std::string("label")});
    EXPECT_EQ(parse_column_ref("1a"), ColumnRef{std::string("1a")});
}

// ---------------------------------------------------------------------------

TEST(CliEvaluate, WrongDimensionIsDataError) {
    const auto dir = testing::scratch_dir("cli_eval_dim");
    ASSERT_EQ(run_cmd(write_config(dir, toy_config()), dir / "out").code, kExitOk);
    Rng rng(1);
    save_binary(Dataset(testing::random_matrix(5, 7, rng), {0, 1, 2, 0, 1}, 3), dir / "wide.pnnl");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_evaluate(dir / "out" / "model.pmlp", dir / "wide.pnnl", {}, out, err), kExitDataError);
    EXPECT_THROW(evaluate_model_file(dir / "out" / "model.pmlp", dir / "wide.pnnl", {}), DimensionError);
    EXPECT_EQ(cmd_evaluate(dir / "missing.pmlp", dir / "wide.pnnl", {}, out, err), kExitDataError);
}

TEST(CliEvaluate, PrintsAccuracyAndLoss) {
    const auto dir = testing::scratch_dir("cli_eval");
    ASSERT_EQ(run_cmd(write_config(dir, toy_config()), dir / "out").code, kExitOk);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_evaluate(dir / "out" / "model.pmlp", dir / "out" / "test_split.pnnl", {}, out, err), kExitOk);
    EXPECT_EQ(out.str().rfind("accuracy=", 0), 0u);
    EXPECT_NE(out.str().find("loss="), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(ReportJson, RoundTripAndSummaryRecomputation) {
    const auto dir = testing::scratch_dir("cli_report");
    ASSERT_EQ(run_cmd(write_config(dir, toy_config()), dir / "out").code, kExitOk);
    const json doc = read_json(dir / "out" / "report.json");
    const RunReport r = report_from_json(doc);
    ASSERT_FALSE(r.steps.empty());

    double block_total = 0.0;
    UniqueTracker tracker(doc["dataset"]["train"].get<std::size_t>());
    for (const auto& s : r.steps) {
        block_total += s.block_time_s;
        tracker.track({s.subset, s.step});
        EXPECT_EQ(tracker.unique_count(), s.unique_count);
    }
    EXPECT_DOUBLE_EQ(r.avg_block_time_s, block_total / static_cast<double>(r.steps.size()));
    EXPECT_EQ(doc["summary"]["unique_samples_total"].get<std::size_t>(), tracker.unique_count());
    EXPECT_EQ(doc["summary"]["steps"].get<std::size_t>(), r.steps.size());

    for (const auto& step : doc["steps"]) {
        std::vector<CandidateMetrics> metrics;
        for (const auto& c : step["candidates"])
            metrics.push_back({c["val_accuracy"].get<double>(), c["val_loss"].get<double>(), c["ok"].get<bool>()});
        EXPECT_EQ(select_best(metrics), step["chosen"].get<std::size_t>());
    }
}

TEST(ReportJson, MaskNullsEveryWallTimeField) {
    const json doc = {{"total_time_s", 1.5},
                      {"steps", {{{"block_time_s", 0.2}, {"candidates", {{{"train_time_s", 0.1}, {"x", 1}}}}}}},
                      {"keep", 3}};
    const json masked = mask_wall_time(doc);
    EXPECT_TRUE(masked["total_time_s"].is_null());
    EXPECT_TRUE(masked["steps"][0]["block_time_s"].is_null());
    EXPECT_TRUE(masked["steps"][0]["candidates"][0]["train_time_s"].is_null());
    EXPECT_EQ(masked["steps"][0]["candidates"][0]["x"], 1);
    EXPECT_EQ(masked["keep"], 3);
}

// ---------------------------------------------------------------------------

TEST(CliBench, EmptyDirectoryGivesEmptyTable) {
    const auto dir = testing::scratch_dir("cli_bench_empty");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_bench({dir, {}, 1, true}, out, err), kExitOk);
    const std::string table = out.str();
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1);
    EXPECT_EQ(collect_bench({dir, {}, 1, true}, err).size(), 0u);
}

TEST(CliBench, TabulatesCompletedReports) {
    const auto dir = testing::scratch_dir("cli_bench");
    const auto runs = dir / "runs";
    fs::create_directories(dir / "reports");
    for (const char* name : {"c", "a", "b"}) {
        json cfg = toy_config();
        cfg["base_seed"] = static_cast<int>(name[0]);
        ASSERT_EQ(run_cmd(write_config(dir, cfg, std::string(name) + "_cfg.json"), runs / name).code, kExitOk);
        fs::copy_file(runs / name / "report.json", dir / "reports" / (std::string(name) + ".json"));
    }
    std::ostringstream out, err;
    ASSERT_EQ(cmd_bench({dir / "reports", {}, 1, true}, out, err), kExitOk) << err.str();
    const std::string table = out.str();
    for (const char* col : {"accuracy", "unique", "avg_block_s", "total_s"}) EXPECT_NE(table.find(col), std::string::npos);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);

    const auto rows = collect_bench({dir / "reports", {}, 1, true}, err);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].name, "a");
    EXPECT_EQ(rows[2].name, "c");
    const RunReport a = report_from_json(read_json(dir / "reports" / "a.json"));
    EXPECT_DOUBLE_EQ(rows[0].accuracy, 100.0 * a.test_accuracy);
    EXPECT_EQ(rows[0].unique, a.unique_samples_total());
    for (const auto& row : rows) {
        const RunReport r = report_from_json(read_json(dir / "reports" / (row.name + ".json")));
        double sum = 0.0;
        for (const auto& s : r.steps) sum += s.block_time_s;
        EXPECT_NEAR(row.avg_block_s, sum / static_cast<double>(r.steps.size()), 1e-9);
    }

    std::ifstream csv(dir / "reports" / "bench.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "name,accuracy,unique,avg_block_s,total_s");
}

TEST(CliBench, RunsConfigsIdenticallySerialOrConcurrent) {
    const auto dir = testing::scratch_dir("cli_bench_cfg");
    fs::create_directories(dir / "cfgs");
    for (int i = 0; i < 3; ++i) {
        json cfg = toy_config();
        cfg["base_seed"] = i;
        write_config(dir / "cfgs", cfg, "run" + std::to_string(i) + ".json");
    }
    std::ostringstream err;
    const auto serial = collect_bench({dir / "cfgs", dir / "serial", 1, true}, err);
    const auto parallel = collect_bench({dir / "cfgs", dir / "parallel", 3, true}, err);
    ASSERT_EQ(serial.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(serial[i].name, parallel[i].name);
        EXPECT_EQ(serial[i].accuracy, parallel[i].accuracy);
        EXPECT_EQ(serial[i].unique, parallel[i].unique);
        const auto rel = fs::path("run" + std::to_string(i)) / "report.json";
        EXPECT_EQ(mask_wall_time(read_json(dir / "serial" / rel)), mask_wall_time(read_json(dir / "parallel" / rel)));
    }
}

TEST(CliBench, UnreadableReportIsDataError) {
    const auto dir = testing::scratch_dir("cli_bench_bad");
    std::ofstream(dir / "junk.json") << "[1, 2";
    std::ostringstream out, err;
    EXPECT_EQ(cmd_bench({dir, {}, 1, true}, out, err), kExitDataError);
}

// ---------------------------------------------------------------------------

int run_binary(const std::string& args) {
    const std::string cmd = std::string(PNNL_EXECUTABLE) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinary, ExitCodes) {
    const auto dir = testing::scratch_dir("cli_binary");
    const auto cfg = write_config(dir, toy_config());
    EXPECT_EQ(run_binary("run --config " + cfg.string() + " --out " + (dir / "o").string() + " --quiet"), 0);
    EXPECT_EQ(run_binary("evaluate " + (dir / "o" / "model.pmlp").string() + " " +
                         (dir / "o" / "test_split.pnnl").string()),
              0);
    EXPECT_EQ(run_binary("run --config " + (dir / "nope.json").string()), 2);
    EXPECT_EQ(run_binary("frobnicate"), 2);
    EXPECT_EQ(run_binary(""), 2);
    EXPECT_EQ(run_binary("convert " + (dir / "missing.csv").string() + " --label y -o " + (dir / "x.pnnl").string()),
              3);
    EXPECT_EQ(run_binary("bench " + (dir / "empty_does_not_exist").string()), 3);
    EXPECT_EQ(run_binary("--help"), 0);
}

}  // namespace
}  // namespace pnnl::cli
