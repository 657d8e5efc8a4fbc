#include "pnnl/cli/run_config.hpp"

#include "pnnl/errors.hpp"

#include <fstream>
#include <set>

namespace pnnl::cli {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "dataset_path", "dataset_format", "label_column", "num_classes", "split_fractions", "split_seed",
        "standardize", "strategy", "subset_fraction", "subset_size", "block_size", "max_blocks_per_layer",
        "max_layers", "epsilon", "patience", "num_clusters", "representation", "learning_rates", "weight_decays",
        "dropout_rates", "epochs", "fine_tune_epochs", "base_seed", "candidate_jobs", "output_directory"};
    return keys;
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

template <typename T>
std::vector<T> list_or(const json& doc, const char* key, std::vector<T> fallback) {
    if (!doc.contains(key)) return fallback;
    const json& v = doc.at(key);
    if (!v.is_array()) return {get_or<T>(doc, key, T{})};
    return get_or<std::vector<T>>(doc, key, fallback);
}

std::size_t count_or(const json& doc, const char* key, std::size_t fallback) {
    const auto v = get_or<std::int64_t>(doc, key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("config field '") + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!known_keys().contains(key)) throw ConfigError("unknown config field '" + key + "'");

    RunConfig c;
    if (!doc.contains("dataset_path")) throw ConfigError("config field 'dataset_path' is required");
    c.dataset_path_text = get_or<std::string>(doc, "dataset_path", "");
    c.dataset_path = std::filesystem::path(c.dataset_path_text);
    if (c.dataset_path.is_relative()) c.dataset_path = base_dir / c.dataset_path;

    c.dataset_format = get_or<std::string>(doc, "dataset_format", "auto");
    if (c.dataset_format != "auto" && c.dataset_format != "csv" && c.dataset_format != "binary")
        throw ConfigError("dataset_format must be auto, csv or binary");
    if (doc.contains("label_column") && !doc.at("label_column").is_null()) {
        const json& lc = doc.at("label_column");
        if (lc.is_string()) c.label_column = lc.get<std::string>();
        else if (lc.is_number_unsigned()) c.label_column = lc.get<std::size_t>();
        else throw ConfigError("label_column must be a column name or a non-negative index");
    }
    if (doc.contains("num_classes") && !doc.at("num_classes").is_null())
        c.num_classes = static_cast<std::uint32_t>(count_or(doc, "num_classes", 0));

    const auto fractions = get_or<std::vector<double>>(doc, "split_fractions", {0.8, 0.1, 0.1});
    if (fractions.size() != 3) throw ConfigError("split_fractions needs exactly three values");
    c.split_fractions = {fractions[0], fractions[1], fractions[2]};
    if (fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0 ||
        std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
        throw ConfigError("split_fractions must be positive and sum to 1");
    c.split_seed = get_or<std::uint64_t>(doc, "split_seed", 0);
    c.standardize = get_or<bool>(doc, "standardize", true);

    ProgressionConfig& p = c.progression;
    p.strategy = parse_strategy(get_or<std::string>(doc, "strategy", "random"));
    p.subset_fraction = get_or<double>(doc, "subset_fraction", 0.1);
    if (doc.contains("subset_size") && !doc.at("subset_size").is_null()) p.subset_size = count_or(doc, "subset_size", 1);
    p.block_size = count_or(doc, "block_size", p.block_size);
    p.max_blocks_per_layer = count_or(doc, "max_blocks_per_layer", p.max_blocks_per_layer);
    p.max_layers = count_or(doc, "max_layers", p.max_layers);
    p.improvement_epsilon = get_or<double>(doc, "epsilon", p.improvement_epsilon);
    p.patience = count_or(doc, "patience", p.patience);
    if (doc.contains("num_clusters") && !doc.at("num_clusters").is_null())
        p.num_clusters = count_or(doc, "num_clusters", 1);
    const auto rep = get_or<std::string>(doc, "representation", "probabilities");
    if (rep == "probabilities") p.representation = Representation::probabilities;
    else if (rep == "logits") p.representation = Representation::logits;
    else throw ConfigError("representation must be probabilities or logits");
    p.fine_tune_epochs = static_cast<std::uint32_t>(count_or(doc, "fine_tune_epochs", 0));
    p.base_seed = get_or<std::uint64_t>(doc, "base_seed", 0);
    p.candidate_jobs = count_or(doc, "candidate_jobs", 1);
    p.validate();

    c.grid.learning_rates = list_or<double>(doc, "learning_rates", {1e-3});
    c.grid.weight_decays = list_or<double>(doc, "weight_decays", {0.0});
    c.grid.dropout_rates = list_or<double>(doc, "dropout_rates", {0.0});
    c.grid.epochs = list_or<std::uint32_t>(doc, "epochs", {20});
    enumerate_grid(c.grid);

    c.output_directory = get_or<std::string>(doc, "output_directory", "out");
    if (c.output_directory.is_relative()) c.output_directory = base_dir / c.output_directory;
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

json config_echo(const RunConfig& c) {
    const auto& p = c.progression;
    json j;
    j["dataset_path"] = c.dataset_path_text;
    j["dataset_format"] = c.dataset_format;
    if (c.label_column) {
        if (const auto* name = std::get_if<std::string>(&*c.label_column)) j["label_column"] = *name;
        else j["label_column"] = std::get<std::size_t>(*c.label_column);
    } else {
        j["label_column"] = nullptr;
    }
    j["num_classes"] = c.num_classes ? json(*c.num_classes) : json(nullptr);
    j["split_fractions"] = {c.split_fractions.train, c.split_fractions.val, c.split_fractions.test};
    j["split_seed"] = c.split_seed;
    j["standardize"] = c.standardize;
    j["strategy"] = std::string(to_string(p.strategy));
    j["subset_fraction"] = p.subset_fraction;
    j["subset_size"] = p.subset_size ? json(*p.subset_size) : json(nullptr);
    j["block_size"] = p.block_size;
    j["max_blocks_per_layer"] = p.max_blocks_per_layer;
    j["max_layers"] = p.max_layers;
    j["epsilon"] = p.improvement_epsilon;
    j["patience"] = p.patience;
    j["num_clusters"] = p.num_clusters ? json(*p.num_clusters) : json(nullptr);
    j["representation"] = p.representation == Representation::probabilities ? "probabilities" : "logits";
    j["learning_rates"] = c.grid.learning_rates;
    j["weight_decays"] = c.grid.weight_decays;
    j["dropout_rates"] = c.grid.dropout_rates;
    j["epochs"] = c.grid.epochs;
    j["fine_tune_epochs"] = p.fine_tune_epochs;
    j["base_seed"] = p.base_seed;
    j["candidate_jobs"] = p.candidate_jobs;
    return j;
}

Dataset load_config_dataset(const RunConfig& config, std::vector<std::string>* warnings) {
    if (!std::filesystem::exists(config.dataset_path))
        throw DataError("dataset file not found: " + config.dataset_path.string());
    const CsvOptions options{config.num_classes};
    const bool csv = config.dataset_format == "csv" ||
                     (config.dataset_format == "auto" && config.dataset_path.extension() == ".csv");
    if (csv) {
        if (!config.label_column) throw ConfigError("CSV datasets need 'label_column'");
        CsvLoad loaded = load_csv(config.dataset_path, *config.label_column, options);
        if (warnings) warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
        return std::move(loaded.dataset);
    }
    Dataset d = load_binary(config.dataset_path);
    if (config.num_classes && *config.num_classes != d.num_classes())
        d = Dataset(d.features(), d.labels(), *config.num_classes);
    return d;
}

}  // namespace pnnl::cli
