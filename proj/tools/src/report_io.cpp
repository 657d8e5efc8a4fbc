#include "pnnl/cli/report_io.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <fstream>

namespace pnnl::cli {

using nlohmann::json;

json report_to_json(const RunReport& report, const json& config_echo, const DatasetInfo& info, const HyperGrid& grid) {
    json doc;
    doc["format"] = "pnnl-report";
    doc["version"] = 1;
    doc["status"] = report.completed ? "completed" : "failed";
    if (!report.completed) doc["error"] = report.error;
    doc["config"] = config_echo;
    doc["dataset"] = {{"num_samples", info.num_samples}, {"dim", info.dim},     {"num_classes", info.num_classes},
                      {"train", info.train},             {"val", info.val},     {"test", info.test},
                      {"stratified", info.stratified}};
    json combos = json::array();
    for (const auto& hp : grid.combos)
        combos.push_back({{"learning_rate", hp.learning_rate},
                          {"weight_decay", hp.weight_decay},
                          {"dropout_rate", hp.dropout_rate},
                          {"epochs", hp.epochs}});
    doc["grid"] = combos;

    json steps = json::array();
    for (const auto& s : report.steps) {
        json candidates = json::array();
        for (const auto& c : s.candidates)
            candidates.push_back({{"index", c.index},
                                  {"val_accuracy", c.val_accuracy},
                                  {"val_loss", c.val_loss},
                                  {"ok", c.ok},
                                  {"train_time_s", c.train_time_s}});
        steps.push_back({{"step", s.step},
                         {"layer", s.layer},
                         {"chosen", s.chosen},
                         {"subset_size", s.subset.size()},
                         {"subset", s.subset},
                         {"val_accuracy_before", s.val_accuracy_before},
                         {"val_accuracy_after", s.val_accuracy_after},
                         {"unique_count", s.unique_count},
                         {"block_time_s", s.block_time_s},
                         {"candidates", candidates}});
    }
    doc["steps"] = steps;

    const auto& ft = report.fine_tune;
    doc["fine_tune"] = {{"ran", ft.ran},
                        {"hyperparams_index", ft.hyperparams_index},
                        {"epochs", ft.epochs},
                        {"best_epoch", ft.best_epoch},
                        {"val_accuracy_start", ft.val_accuracy_start},
                        {"val_accuracy_best", ft.val_accuracy_best},
                        {"test_accuracy_before", ft.test_accuracy_before},
                        {"fine_tune_time_s", ft.time_s}};

    doc["summary"] = {{"test_accuracy", report.test_accuracy},
                      {"test_loss", report.test_loss},
                      {"unique_samples_total", report.unique_samples_total()},
                      {"avg_block_time_s", report.avg_block_time_s},
                      {"total_time_s", report.total_time_s},
                      {"param_count", report.param_count},
                      {"steps", report.steps.size()},
                      {"layers", report.layers},
                      {"subset_size", report.subset_size}};
    return doc;
}

RunReport report_from_json(const json& doc) {
    try {
        if (!doc.is_object() || !doc.contains("steps") || !doc.contains("summary"))
            throw DataError("not a run report (missing steps/summary)");
        RunReport r;
        for (const auto& s : doc.at("steps")) {
            StepRecord rec;
            rec.step = s.at("step").get<std::size_t>();
            rec.layer = s.at("layer").get<std::size_t>();
            rec.chosen = s.at("chosen").get<std::size_t>();
            rec.subset = s.at("subset").get<std::vector<std::size_t>>();
            rec.val_accuracy_before = s.at("val_accuracy_before").get<double>();
            rec.val_accuracy_after = s.at("val_accuracy_after").get<double>();
            rec.unique_count = s.at("unique_count").get<std::size_t>();
            rec.block_time_s = s.at("block_time_s").is_null() ? 0.0 : s.at("block_time_s").get<double>();
            for (const auto& c : s.at("candidates")) {
                CandidateRecord cr;
                cr.index = c.at("index").get<std::size_t>();
                cr.val_accuracy = c.at("val_accuracy").get<double>();
                cr.val_loss = c.at("val_loss").get<double>();
                cr.ok = c.at("ok").get<bool>();
                cr.train_time_s = c.at("train_time_s").is_null() ? 0.0 : c.at("train_time_s").get<double>();
                rec.candidates.push_back(cr);
            }
            r.steps.push_back(std::move(rec));
        }
        const json& sum = doc.at("summary");
        r.test_accuracy = sum.at("test_accuracy").get<double>();
        r.test_loss = sum.at("test_loss").get<double>();
        r.avg_block_time_s = sum.at("avg_block_time_s").is_null() ? 0.0 : sum.at("avg_block_time_s").get<double>();
        r.total_time_s = sum.at("total_time_s").is_null() ? 0.0 : sum.at("total_time_s").get<double>();
        r.param_count = sum.at("param_count").get<std::size_t>();
        r.layers = sum.at("layers").get<std::size_t>();
        r.subset_size = sum.value("subset_size", std::size_t{0});
        r.completed = doc.value("status", std::string("completed")) == "completed";
        r.error = doc.value("error", std::string());
        if (doc.contains("fine_tune")) {
            const json& ft = doc.at("fine_tune");
            r.fine_tune.ran = ft.at("ran").get<bool>();
            r.fine_tune.hyperparams_index = ft.at("hyperparams_index").get<std::size_t>();
            r.fine_tune.epochs = ft.at("epochs").get<std::uint32_t>();
            r.fine_tune.best_epoch = ft.at("best_epoch").get<std::uint32_t>();
            r.fine_tune.val_accuracy_start = ft.at("val_accuracy_start").get<double>();
            r.fine_tune.val_accuracy_best = ft.at("val_accuracy_best").get<double>();
            r.fine_tune.test_accuracy_before = ft.at("test_accuracy_before").get<double>();
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run report: ") + e.what());
    }
}

json mask_wall_time(json doc) {
    if (doc.is_object()) {
        for (auto& [key, value] : doc.items()) {
            if (std::find(kWallTimeFields.begin(), kWallTimeFields.end(), key) != kWallTimeFields.end())
                value = nullptr;
            else
                value = mask_wall_time(std::move(value));
        }
    } else if (doc.is_array()) {
        for (auto& v : doc) v = mask_wall_time(std::move(v));
    }
    return doc;
}

void write_json(const json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace pnnl::cli
