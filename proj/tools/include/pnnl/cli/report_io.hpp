#pragma once

#include "pnnl/hyperopt.hpp"
#include "pnnl/progression.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <string_view>

namespace pnnl::cli {

// Fields that carry wall-clock measurements. Two runs of one config produce
// report.json documents that are identical once these are masked.
inline constexpr std::array<std::string_view, 5> kWallTimeFields{
    "block_time_s", "train_time_s", "avg_block_time_s", "total_time_s", "fine_tune_time_s"};

struct DatasetInfo {
    std::size_t num_samples = 0;
    std::size_t dim = 0;
    std::uint32_t num_classes = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
    bool stratified = false;
};

nlohmann::json report_to_json(const RunReport& report, const nlohmann::json& config_echo, const DatasetInfo& info,
                              const HyperGrid& grid);

// Step records and summary numbers back from a report document.
RunReport report_from_json(const nlohmann::json& doc);

// Replaces every wall-time field, at any depth, with null.
nlohmann::json mask_wall_time(nlohmann::json doc);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace pnnl::cli
