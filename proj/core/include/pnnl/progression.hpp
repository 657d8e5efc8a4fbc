#pragma once

#include "pnnl/dataset.hpp"
#include "pnnl/hyperopt.hpp"
#include "pnnl/network.hpp"
#include "pnnl/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pnnl {

enum class Strategy { random, top_loss, cluster_top_loss };

std::string_view to_string(Strategy s) noexcept;
// Accepts "random", "top_loss", "cluster_top_loss"; throws ConfigError otherwise.
Strategy parse_strategy(std::string_view name);

struct ProgressionConfig {
    std::size_t block_size = 16;
    std::size_t max_blocks_per_layer = 20;
    std::size_t max_layers = 3;
    double improvement_epsilon = 0.001;   // absolute validation-accuracy fraction
    std::size_t patience = 3;
    double subset_fraction = 0.1;
    std::optional<std::size_t> subset_size;   // absolute M; wins over the fraction
    Strategy strategy = Strategy::random;
    std::optional<std::size_t> num_clusters;  // default K
    Representation representation = Representation::probabilities;
    std::uint32_t fine_tune_epochs = 0;
    std::uint64_t base_seed = 0;
    std::size_t candidate_jobs = 1;

    void validate() const;
};

// M for a training split of n rows: the absolute size if given, else
// ceil(fraction * n), always at least 1 and at most n.
std::size_t subset_size_for(const ProgressionConfig& config, std::size_t n_train);

struct CandidateRecord {
    std::size_t index = 0;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    double train_time_s = 0.0;
    bool ok = true;
};

struct StepRecord {
    std::size_t step = 0;          // k, from 1
    std::size_t layer = 0;         // 0-based layer that received the block
    std::size_t chosen = 0;        // h*
    std::vector<std::size_t> subset;
    double val_accuracy_before = 0.0;
    double val_accuracy_after = 0.0;
    std::size_t unique_count = 0;
    double block_time_s = 0.0;     // all Q candidate problems of the step
    std::vector<CandidateRecord> candidates;
};

struct FineTuneRecord {
    bool ran = false;
    std::size_t hyperparams_index = 0;
    std::uint32_t epochs = 0;
    std::uint32_t best_epoch = 0;
    double val_accuracy_start = 0.0;
    double val_accuracy_best = 0.0;
    double test_accuracy_before = 0.0;
    double time_s = 0.0;
};

struct RunReport {
    std::vector<StepRecord> steps;
    FineTuneRecord fine_tune;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    double total_time_s = 0.0;
    double avg_block_time_s = 0.0;
    std::size_t param_count = 0;
    std::size_t layers = 0;
    std::size_t subset_size = 0;   // M
    bool completed = false;
    std::string error;

    std::size_t unique_samples_total() const noexcept { return steps.empty() ? 0 : steps.back().unique_count; }
};

struct RunResult {
    Topology topology;
    RunReport report;
};

// Invoked after every completed step with the topology (all blocks frozen).
using StepObserver = std::function<void(const Topology&, const StepRecord&)>;

// True iff each of the last `patience` values improved on the running best
// of the values before it by less than `epsilon`.
bool improvement_tracker(std::span<const double> history, double epsilon, std::size_t patience);

// The hyperparameter index chosen most often across steps, earliest on ties.
std::size_t modal_choice(std::span<const StepRecord> steps, std::size_t grid_size);

// Grow, sample, train Q candidates, select, freeze; move to a new layer when
// the current one saturates; fine-tune; test. A step failure returns the
// partial report with completed == false.
RunResult run(const ProgressionConfig& config, const HyperGrid& grid, const Dataset& dataset, const DataSplit& split,
              const StepObserver& observer = {});

}  // namespace pnnl
