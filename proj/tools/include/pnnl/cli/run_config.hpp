#pragma once

#include "pnnl/dataset.hpp"
#include "pnnl/hyperopt.hpp"
#include "pnnl/progression.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace pnnl::cli {

// On-disk experiment description: a flat JSON object.
struct RunConfig {
    std::filesystem::path dataset_path;     // resolved against the config's directory
    std::string dataset_path_text;          // as written in the file
    std::string dataset_format = "auto";    // auto | csv | binary
    std::optional<ColumnRef> label_column;
    std::optional<std::uint32_t> num_classes;
    SplitFractions split_fractions;
    std::uint64_t split_seed = 0;
    bool standardize = true;
    ProgressionConfig progression;
    GridLists grid;
    std::filesystem::path output_directory = "out";
};

// Throws ConfigError on unknown keys, wrong types or out-of-range values.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Normalized echo written into report.json. output_directory is left out:
// it names where the report lives, not how it was produced.
nlohmann::json config_echo(const RunConfig& config);

// CSV loader warnings (e.g. classes without samples) are appended to `warnings`.
Dataset load_config_dataset(const RunConfig& config, std::vector<std::string>* warnings = nullptr);

}  // namespace pnnl::cli
