#include "pnnl/dataset.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

namespace pnnl {

Dataset::Dataset(Matrix features, std::vector<std::uint32_t> labels, std::uint32_t num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
    if (features_.rows() == 0 || features_.cols() == 0)
        throw DataError("dataset needs at least one row and one feature column");
    if (labels_.size() != features_.rows())
        throw DataError("dataset has " + std::to_string(features_.rows()) + " rows but " +
                        std::to_string(labels_.size()) + " labels");
    if (num_classes_ < 2) throw DataError("dataset needs at least 2 classes");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= num_classes_)
            throw DataError("label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                            " is not below K=" + std::to_string(num_classes_));
    }
    if (!features_.all_finite()) throw DataError("dataset contains NaN or infinite features");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<std::uint32_t> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(labels_.at(i));
    return Dataset(features_.gather_rows(indices), std::move(labels), num_classes_);
}

Dataset quantize_to_binary32(const Dataset& dataset) {
    Matrix features = dataset.features();
    for (double& v : features.values()) v = static_cast<double>(static_cast<float>(v));
    return Dataset(std::move(features), dataset.labels(), dataset.num_classes());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string_view unquote(std::string_view s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

bool parse_real(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end && !text.empty();
}

}  // namespace

CsvLoad load_csv(const std::filesystem::path& path, const ColumnRef& label_column,
                 const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!trim(line).empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw DataError(path.string() + ": empty file");
    const auto header = split_fields(line);
    std::size_t label_idx = 0;
    if (const auto* name = std::get_if<std::string>(&label_column)) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](std::string_view h) { return unquote(h) == *name; });
        if (it == header.end()) throw DataError(path.string() + ": no label column named '" + *name + "'");
        label_idx = static_cast<std::size_t>(std::distance(header.begin(), it));
    } else {
        label_idx = std::get<std::size_t>(label_column);
        if (label_idx >= header.size())
            throw DataError(path.string() + ": label column index " + std::to_string(label_idx) +
                            " out of range for " + std::to_string(header.size()) + " columns");
    }
    const std::size_t width = header.size();
    if (width < 2) throw DataError(path.string() + ": need at least one feature column besides the label");

    std::vector<double> values;
    std::vector<std::uint32_t> labels;
    while (next_line()) {
        const auto fields = split_fields(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != width)
            throw DataError(where + ": ragged row with " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(width));
        for (std::size_t c = 0; c < width; ++c) {
            double v = 0.0;
            if (!parse_real(fields[c], v) || !std::isfinite(v)) {
                if (c == label_idx) throw DataError(where + ": label '" + std::string(fields[c]) + "' is not a number");
                throw DataError(where + ": non-numeric feature '" + std::string(fields[c]) + "' in column " +
                                std::to_string(c));
            }
            if (c == label_idx) {
                if (v < 0.0 || v != std::floor(v) || v >= static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
                    throw DataError(where + ": label '" + std::string(fields[c]) +
                                    "' is not a non-negative integer");
                labels.push_back(static_cast<std::uint32_t>(v));
            } else {
                values.push_back(v);
            }
        }
    }
    if (labels.empty()) throw DataError(path.string() + ": empty file (header only)");

    const std::uint32_t max_label = *std::max_element(labels.begin(), labels.end());
    std::uint32_t k = std::max<std::uint32_t>(2, max_label + 1);
    CsvLoad out;
    if (options.num_classes) {
        if (*options.num_classes <= max_label)
            throw DataError(path.string() + ": num_classes override " + std::to_string(*options.num_classes) +
                            " does not exceed max label " + std::to_string(max_label));
        k = *options.num_classes;
    }
    std::vector<std::size_t> counts(k, 0);
    for (auto y : labels) ++counts[y];
    std::string missing;
    for (std::uint32_t c = 0; c < k; ++c) {
        if (counts[c] == 0) missing += (missing.empty() ? "" : ",") + std::to_string(c);
    }
    if (!missing.empty())
        out.warnings.push_back("classes {" + missing + "} have no samples (K=" + std::to_string(k) + ")");

    Matrix features(labels.size(), width - 1);
    std::copy(values.begin(), values.end(), features.values().begin());
    out.dataset = Dataset(std::move(features), std::move(labels), k);
    return out;
}

// ---------------------------------------------------------------------------
// PNNL binary
// ---------------------------------------------------------------------------
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{0x50, 0x4E, 0x4E, 0x4C};
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4 + 4;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
    return value;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_binary(const Dataset& dataset) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    out.reserve(kHeaderBytes + dataset.features().size() * 4 + dataset.size() * 4);
    put_le<std::uint16_t>(out, kDatasetFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.dim()));
    put_le<std::uint32_t>(out, dataset.num_classes());
    for (double v : dataset.features().values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    for (std::uint32_t y : dataset.labels()) put_le<std::uint32_t>(out, y);
    return out;
}

Dataset decode_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw DataError("not a PNNL dataset (bad magic)");
    if (bytes.size() < kHeaderBytes) throw DataError("PNNL dataset truncated inside header");
    const auto version = get_le<std::uint16_t>(bytes, 4);
    if (version != kDatasetFormatVersion)
        throw DataError("PNNL dataset version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kDatasetFormatVersion) + ")");
    const std::uint64_t n = get_le<std::uint32_t>(bytes, 6);
    const std::uint64_t d = get_le<std::uint32_t>(bytes, 10);
    const std::uint32_t k = get_le<std::uint32_t>(bytes, 14);
    const std::uint64_t expected = kHeaderBytes + n * d * 4 + n * 4;
    if (bytes.size() < expected)
        throw DataError("PNNL dataset truncated: header claims N=" + std::to_string(n) + ", D=" +
                        std::to_string(d) + " (" + std::to_string(expected) + " bytes) but file has " +
                        std::to_string(bytes.size()) + " bytes");
    if (bytes.size() > expected)
        throw DataError("PNNL dataset has " + std::to_string(bytes.size() - expected) + " trailing bytes");

    Matrix features(n, d);
    std::size_t offset = kHeaderBytes;
    for (double& v : features.values()) {
        v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset)));
        offset += 4;
    }
    std::vector<std::uint32_t> labels(n);
    for (auto& y : labels) {
        y = get_le<std::uint32_t>(bytes, offset);
        offset += 4;
    }
    return Dataset(std::move(features), std::move(labels), k);
}

void save_binary(const Dataset& dataset, const std::filesystem::path& path) {
    const auto bytes = encode_binary(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write dataset file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing dataset file: " + path.string());
}

Dataset load_binary(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_binary(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Dataset load_dataset(const std::filesystem::path& path, const std::optional<ColumnRef>& label_column,
                     const CsvOptions& options) {
    if (!std::filesystem::exists(path)) throw DataError("dataset file not found: " + path.string());
    if (path.extension() == ".csv") {
        if (!label_column) throw DataError(path.string() + ": CSV input needs a label column");
        return load_csv(path, *label_column, options).dataset;
    }
    return load_binary(path);
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------
namespace {

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Largest-remainder allocation of `total` across classes proportional to
// counts[c] * fraction; ties go to the lower class index.
std::vector<std::size_t> allocate(std::span<const std::size_t> counts, double fraction, std::size_t total) {
    const std::size_t k = counts.size();
    std::vector<double> ideal(k);
    std::vector<std::size_t> base(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ideal[c] = static_cast<double>(counts[c]) * fraction;
        base[c] = static_cast<std::size_t>(std::floor(ideal[c]));
        assigned += base[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (ideal[a] - static_cast<double>(base[a])) > (ideal[b] - static_cast<double>(base[b]));
    });
    for (std::size_t i = 0; assigned < total && i < k; ++i, ++assigned) ++base[order[i]];
    return base;
}

}  // namespace

DataSplit split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
    if (fractions.train <= 0.0 || fractions.val <= 0.0 || fractions.test <= 0.0)
        throw ConfigError("split fractions must be positive");
    if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    const std::size_t n = dataset.size();
    if (n < 10) throw DataError("dataset with " + std::to_string(n) + " samples is too small to split (need >= 10)");

    const std::size_t n_val = round_half_up(static_cast<double>(n) * fractions.val);
    const std::size_t n_test = round_half_up(static_cast<double>(n) * fractions.test);
    if (n_val == 0 || n_test == 0 || n_val + n_test >= n)
        throw DataError("dataset with " + std::to_string(n) + " samples cannot give every split a sample");

    std::vector<std::size_t> counts(dataset.num_classes(), 0);
    for (auto y : dataset.labels()) ++counts[y];
    const bool stratify = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0 || c >= 10; });

    Rng rng(seed);
    DataSplit out;
    out.stratified = stratify;
    if (stratify) {
        const auto val_counts = allocate(counts, fractions.val, n_val);
        const auto test_counts = allocate(counts, fractions.test, n_test);
        for (std::uint32_t c = 0; c < counts.size(); ++c) {
            std::vector<std::size_t> members;
            members.reserve(counts[c]);
            for (std::size_t i = 0; i < n; ++i)
                if (dataset.labels()[i] == c) members.push_back(i);
            shuffle(std::span<std::size_t>(members), rng);
            const std::size_t n_train_c = counts[c] - val_counts[c] - test_counts[c];
            out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train_c));
            out.val.insert(out.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train_c),
                           members.begin() + static_cast<std::ptrdiff_t>(n_train_c + val_counts[c]));
            out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train_c + val_counts[c]),
                            members.end());
        }
    } else {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle(std::span<std::size_t>(perm), rng);
        const std::size_t n_train = n - n_val - n_test;
        out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                       perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------
Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> rows) {
    if (rows.empty()) throw DataError("cannot fit a standardizer on zero rows");
    const std::size_t d = features.cols();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const auto row = features.row(r);
        for (std::size_t c = 0; c < d; ++c) s.mean[c] += row[c];
    }
    for (double& m : s.mean) m *= inv_n;
    for (std::size_t r : rows) {
        const auto row = features.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = row[c] - s.mean[c];
            s.stddev[c] += dev * dev;
        }
    }
    for (double& v : s.stddev) v = std::max(kStddevFloor, std::sqrt(v * inv_n));
    return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
    if (features.cols() != mean.size())
        throw DimensionError("standardizer fitted on " + std::to_string(mean.size()) + " columns, got " +
                             std::to_string(features.cols()));
    Matrix out = features;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) / stddev[c];
    }
    return out;
}

Dataset Standardizer::apply(const Dataset& dataset) const {
    return Dataset(apply(dataset.features()), dataset.labels(), dataset.num_classes());
}

Standardized standardize_fit_apply(const Dataset& dataset, const DataSplit& split) {
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (std::size_t i : *part)
            if (i >= dataset.size()) throw DimensionError("split index out of range for dataset");
    Standardizer s = fit_standardizer(dataset.features(), split.train);
    Dataset transformed = s.apply(dataset);
    return {std::move(transformed), std::move(s)};
}

}  // namespace pnnl
