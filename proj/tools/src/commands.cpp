#include "pnnl/cli/commands.hpp"

#include "pnnl/cli/report_io.hpp"
#include "pnnl/cli/run_config.hpp"
#include "pnnl/errors.hpp"
#include "pnnl/progression.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <sstream>
#include <ostream>
#include <thread>

namespace pnnl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ColumnRef parse_column_ref(const std::string& text) {
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); }))
        return static_cast<std::size_t>(std::stoull(text));
    return text;
}

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfigError;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitDataError;
    return kExitTrainingError;
}

std::string_view kind_of(int code) {
    switch (code) {
        case kExitConfigError: return "config error";
        case kExitDataError: return "data error";
        default: return "training error";
    }
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_run_config(options.config);
        if (options.out_dir) config.output_directory = *options.out_dir;
        if (options.seed) config.progression.base_seed = *options.seed;
        if (options.jobs) config.progression.candidate_jobs = std::max<std::size_t>(1, *options.jobs);
    } catch (const std::exception& e) {
        err << "pnnl run: config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    Dataset data;
    DataSplit split;
    try {
        std::vector<std::string> warnings;
        const Dataset raw = load_config_dataset(config, &warnings);
        for (const auto& w : warnings) err << "pnnl run: warning: " << w << '\n';
        split = pnnl::split(raw, config.split_fractions, config.split_seed);
        data = config.standardize ? standardize_fit_apply(raw, split).dataset : raw;
        // Train on exactly the values test_split.pnnl will hold.
        data = quantize_to_binary32(data);
        ensure_directory(config.output_directory);
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << "pnnl run: " << kind_of(code) << ": " << e.what() << '\n';
        return code;
    }

    const HyperGrid grid = enumerate_grid(config.grid);
    const DatasetInfo info{data.size(),       data.dim(),       data.num_classes(), split.train.size(),
                           split.val.size(), split.test.size(), split.stratified};
    RunResult result;
    try {
        result = pnnl::run(config.progression, grid, data, split);
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << "pnnl run: " << kind_of(code) << ": " << e.what() << '\n';
        return code;
    }

    const fs::path report_path = config.output_directory / "report.json";
    const fs::path model_path = config.output_directory / "model.pmlp";
    const fs::path test_path = config.output_directory / "test_split.pnnl";
    try {
        write_json(report_to_json(result.report, config_echo(config), info, grid), report_path);
        if (!result.report.completed) {
            err << "pnnl run: training error: " << result.report.error << " (partial report in " << report_path.string()
                << ")\n";
            return kExitTrainingError;
        }
        save_model(result.topology, model_path);
        save_binary(data.subset(split.test), test_path);
    } catch (const std::exception& e) {
        err << "pnnl run: data error: " << e.what() << '\n';
        return kExitDataError;
    }

    if (!options.quiet) {
        const auto& r = result.report;
        out << fmt::format("steps={} layers={} params={} M={} unique={}\n", r.steps.size(), r.layers, r.param_count,
                           r.subset_size, r.unique_samples_total());
        out << fmt::format("test_accuracy={:.4f} test_loss={:.4f} avg_block_time_s={:.4f} total_time_s={:.3f}\n",
                           r.test_accuracy, r.test_loss, r.avg_block_time_s, r.total_time_s);
        out << "wrote " << report_path.string() << ", " << model_path.string() << ", " << test_path.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------
int cmd_convert(const fs::path& csv, const std::string& label_column, const fs::path& destination, std::ostream& out,
                std::ostream& err) {
    try {
        CsvLoad loaded = load_csv(csv, parse_column_ref(label_column));
        for (const auto& w : loaded.warnings) err << "pnnl convert: warning: " << w << '\n';
        save_binary(loaded.dataset, destination);
        out << fmt::format("wrote {} (N={}, D={}, K={})\n", destination.string(), loaded.dataset.size(),
                           loaded.dataset.dim(), loaded.dataset.num_classes());
        return kExitOk;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << "pnnl convert: " << kind_of(code) << ": " << e.what() << '\n';
        return code;
    }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
Evaluation evaluate_model_file(const fs::path& model, const fs::path& dataset,
                               const std::optional<std::string>& label_column) {
    const Topology topology = load_model(model);
    std::optional<ColumnRef> column;
    if (label_column) column = parse_column_ref(*label_column);
    const Dataset data = load_dataset(dataset, column);
    if (data.dim() != topology.input_dim())
        throw DimensionError(fmt::format("model expects D={} features but {} has D={}", topology.input_dim(),
                                         dataset.string(), data.dim()));
    if (data.num_classes() > topology.num_classes())
        throw DimensionError(fmt::format("model has K={} classes but {} has K={}", topology.num_classes(),
                                         dataset.string(), data.num_classes()));
    return evaluate(topology, data.features(), data.labels());
}

int cmd_evaluate(const fs::path& model, const fs::path& dataset, const std::optional<std::string>& label_column,
                 std::ostream& out, std::ostream& err) {
    try {
        const Evaluation e = evaluate_model_file(model, dataset, label_column);
        out << fmt::format("accuracy={:.17g} loss={:.17g}\n", e.accuracy, e.loss);
        return kExitOk;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << "pnnl evaluate: " << kind_of(code) << ": " << e.what() << '\n';
        return code;
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------
std::vector<BenchRow> collect_bench(const BenchOptions& options, std::ostream& err) {
    if (!fs::is_directory(options.directory))
        throw DataError("bench directory not found: " + options.directory.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(options.directory))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

    const fs::path runs_root = options.out_dir.value_or(options.directory / "bench_runs");
    std::vector<BenchRow> rows(files.size());
    std::vector<std::exception_ptr> failures(files.size());

    auto process = [&](std::size_t i) {
        const fs::path& file = files[i];
        try {
            json doc = read_json(file);
            if (!(doc.is_object() && doc.contains("summary") && doc.contains("steps"))) {
                RunOptions run;
                run.config = file;
                run.out_dir = runs_root / file.stem();
                run.quiet = true;
                std::ostringstream sink;
                std::ostringstream run_err;
                if (cmd_run(run, sink, run_err) != kExitOk)
                    throw TrainingError("run of " + file.string() + " failed: " + run_err.str());
                doc = read_json(*run.out_dir / "report.json");
            }
            const RunReport report = report_from_json(doc);
            BenchRow row;
            row.name = file.stem().string();
            row.accuracy = 100.0 * report.test_accuracy;
            row.unique = report.unique_samples_total();
            double block_total = 0.0;
            for (const auto& s : report.steps) block_total += s.block_time_s;
            row.avg_block_s = report.steps.empty() ? 0.0 : block_total / static_cast<double>(report.steps.size());
            row.total_s = report.total_time_s;
            rows[i] = row;
        } catch (const TrainingError&) {
            failures[i] = std::current_exception();
        } catch (const std::exception& e) {
            failures[i] = std::make_exception_ptr(DataError("unreadable report " + file.string() + ": " + e.what()));
        }
    };

    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(1, files.size()));
    if (jobs == 1) {
        for (std::size_t i = 0; i < files.size(); ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < jobs; ++t)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) process(i);
            });
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
    (void)err;
    return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
    std::size_t name_w = 4;
    for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
    std::string out = fmt::format("{:<{}}  {:>9}  {:>8}  {:>12}  {:>10}\n", "name", name_w, "accuracy", "unique",
                                  "avg_block_s", "total_s");
    for (const auto& r : rows)
        out += fmt::format("{:<{}}  {:>9.2f}  {:>8}  {:>12.4f}  {:>10.3f}\n", r.name, name_w, r.accuracy, r.unique,
                           r.avg_block_s, r.total_s);
    return out;
}

std::string format_bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "name,accuracy,unique,avg_block_s,total_s\n";
    for (const auto& r : rows)
        out += fmt::format("{},{:.17g},{},{:.17g},{:.17g}\n", r.name, r.accuracy, r.unique, r.avg_block_s, r.total_s);
    return out;
}

int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err) {
    std::vector<BenchRow> rows;
    try {
        rows = collect_bench(options, err);
        const fs::path csv_dir = options.out_dir.value_or(options.directory);
        ensure_directory(csv_dir);
        const fs::path csv_path = csv_dir / "bench.csv";
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) throw DataError("cannot write " + csv_path.string());
        csv << format_bench_csv(rows);
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << "pnnl bench: " << kind_of(code) << ": " << e.what() << '\n';
        return code;
    }
    out << format_bench_table(rows);
    return kExitOk;
}

}  // namespace pnnl::cli
