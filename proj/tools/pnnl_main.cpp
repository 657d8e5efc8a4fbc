#include "pnnl/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Progressive MLP training on selected data subsets"};
    app.require_subcommand(1);

    pnnl::cli::RunOptions run;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    auto* run_cmd = app.add_subcommand("run", "Train a network from a JSON config");
    run_cmd->add_option("--config,config", run.config, "Config file")->required();
    auto* run_out = run_cmd->add_option("--out", out_dir, "Output directory (overrides output_directory)");
    auto* run_seed = run_cmd->add_option("--seed", seed, "Base seed (overrides base_seed)");
    auto* run_jobs = run_cmd->add_option("--jobs", jobs, "Parallel candidate trainings")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--quiet", run.quiet, "Suppress the summary");

    std::string csv_path, label_column, convert_out;
    auto* convert_cmd = app.add_subcommand("convert", "Convert a CSV dataset to the binary format");
    convert_cmd->add_option("csv", csv_path, "Input CSV")->required();
    convert_cmd->add_option("--label", label_column, "Label column (index or header name)")->required();
    convert_cmd->add_option("--out,-o", convert_out, "Output .pnnl file")->required();

    std::string model_path, dataset_path, eval_label;
    auto* eval_cmd = app.add_subcommand("evaluate", "Report accuracy and loss of a saved model");
    eval_cmd->add_option("model", model_path, "Model file")->required();
    eval_cmd->add_option("dataset", dataset_path, "Dataset file (.pnnl or .csv)")->required();
    auto* eval_label_opt = eval_cmd->add_option("--label", eval_label, "Label column for CSV input");

    pnnl::cli::BenchOptions bench;
    std::string bench_out;
    auto* bench_cmd = app.add_subcommand("bench", "Tabulate reports or run configs in a directory");
    bench_cmd->add_option("directory", bench.directory, "Directory of reports/configs")->required();
    auto* bench_out_opt = bench_cmd->add_option("--out", bench_out, "Where runs and bench.csv go");
    bench_cmd->add_option("--jobs", bench.jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pnnl::cli::kExitConfigError;
    }

    if (*run_cmd) {
        if (*run_out) run.out_dir = out_dir;
        if (*run_seed) run.seed = seed;
        if (*run_jobs) run.jobs = jobs;
        return pnnl::cli::cmd_run(run, std::cout, std::cerr);
    }
    if (*convert_cmd) return pnnl::cli::cmd_convert(csv_path, label_column, convert_out, std::cout, std::cerr);
    if (*eval_cmd) {
        std::optional<std::string> label;
        if (*eval_label_opt) label = eval_label;
        return pnnl::cli::cmd_evaluate(model_path, dataset_path, label, std::cout, std::cerr);
    }
    if (*bench_out_opt) bench.out_dir = bench_out;
    return pnnl::cli::cmd_bench(bench, std::cout, std::cerr);
}
