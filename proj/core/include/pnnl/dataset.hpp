#pragma once

#include "pnnl/numerics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pnnl {

// N samples x D features with integer labels in [0, K). Validated on
// construction and immutable afterwards.
class Dataset {
public:
    Dataset() = default;
    Dataset(Matrix features, std::vector<std::uint32_t> labels, std::uint32_t num_classes);

    const Matrix& features() const noexcept { return features_; }
    const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    std::uint32_t num_classes() const noexcept { return num_classes_; }

    // Rows in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    Matrix features_;
    std::vector<std::uint32_t> labels_;
    std::uint32_t num_classes_ = 0;
};

// Rounds every feature to the nearest binary32 value, the precision datasets
// have at rest in the PNNL binary format.
Dataset quantize_to_binary32(const Dataset& dataset);

using ColumnRef = std::variant<std::string, std::size_t>;

struct CsvOptions {
    // Overrides K = max label + 1. Must exceed every label.
    std::optional<std::uint32_t> num_classes;
};

struct CsvLoad {
    Dataset dataset;
    std::vector<std::string> warnings;
};

CsvLoad load_csv(const std::filesystem::path& path, const ColumnRef& label_column,
                 const CsvOptions& options = {});

// PNNL binary dataset format, little-endian:
//   "PNNL" | u16 version=1 | u32 N | u32 D | u32 K | N*D binary32 row-major | N u32 labels
inline constexpr std::uint16_t kDatasetFormatVersion = 1;
void save_binary(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_binary(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_binary(const Dataset& dataset);
Dataset decode_binary(std::span<const std::uint8_t> bytes);

// Picks the loader by extension: ".csv" needs a label column, anything else
// is read as PNNL binary.
Dataset load_dataset(const std::filesystem::path& path, const std::optional<ColumnRef>& label_column,
                     const CsvOptions& options = {});

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    bool stratified = false;

    friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

// Seeded permutation then contiguous cut. Stratified by class when every
// class present has at least 10 members. Index lists come back sorted.
DataSplit split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

inline constexpr double kStddevFloor = 1e-8;

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    Matrix apply(const Matrix& features) const;
    Dataset apply(const Dataset& dataset) const;
};

Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> rows);

struct Standardized {
    Dataset dataset;
    Standardizer standardizer;
};

// Statistics from the train rows only, transform applied to every row.
Standardized standardize_fit_apply(const Dataset& dataset, const DataSplit& split);

}  // namespace pnnl
