#pragma once

#include "pnnl/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pnnl::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitTrainingError = 4;

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;   // overrides output_directory
    std::optional<std::uint64_t> seed;              // overrides base_seed
    std::optional<std::size_t> jobs;                // overrides candidate_jobs
    bool quiet = false;
};

// Writes report.json, model.pmlp and test_split.pnnl (the preprocessed test
// rows the report's test accuracy was measured on).
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

int cmd_convert(const std::filesystem::path& csv, const std::string& label_column,
                const std::filesystem::path& destination, std::ostream& out, std::ostream& err);

// Loads a model and evaluates it on a whole dataset file.
Evaluation evaluate_model_file(const std::filesystem::path& model, const std::filesystem::path& dataset,
                               const std::optional<std::string>& label_column);
int cmd_evaluate(const std::filesystem::path& model, const std::filesystem::path& dataset,
                 const std::optional<std::string>& label_column, std::ostream& out, std::ostream& err);

struct BenchRow {
    std::string name;
    double accuracy = 0.0;      // test accuracy, percent
    std::size_t unique = 0;     // unique training samples selected
    double avg_block_s = 0.0;   // mean per-step optimization time
    double total_s = 0.0;
};

struct BenchOptions {
    std::filesystem::path directory;
    std::optional<std::filesystem::path> out_dir;
    std::size_t jobs = 1;
    bool quiet = false;
};

// Each top-level *.json in the directory is either a finished report (used
// as is) or a run config (executed first). Rows are sorted by file stem.
std::vector<BenchRow> collect_bench(const BenchOptions& options, std::ostream& err);
std::string format_bench_table(const std::vector<BenchRow>& rows);
std::string format_bench_csv(const std::vector<BenchRow>& rows);
int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err);

// "3" selects column 3, anything else is a header name.
ColumnRef parse_column_ref(const std::string& text);

}  // namespace pnnl::cli
