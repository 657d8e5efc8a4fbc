#include "pnnl/progression.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace pnnl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

// Stream domains under the base seed.
constexpr std::uint64_t kInitDomain = 0x494E4954;       // "INIT"
constexpr std::uint64_t kSelectDomain = 0x53454C45;     // "SELE"
constexpr std::uint64_t kCandidateDomain = 0x43414E44;  // "CAND"
constexpr std::uint64_t kFineTuneDomain = 0x46494E45;   // "FINE"

std::uint64_t strategy_tag(Strategy s) {
    switch (s) {
        case Strategy::random: return 1;
        case Strategy::top_loss: return 2;
        case Strategy::cluster_top_loss: return 3;
    }
    return 0;
}

void summarize(RunReport& report, const Topology& topology) {
    double total = 0.0;
    for (const auto& s : report.steps) total += s.block_time_s;
    report.avg_block_time_s = report.steps.empty() ? 0.0 : total / static_cast<double>(report.steps.size());
    report.param_count = param_count(topology);
    report.layers = topology.layers().size();
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::top_loss: return "top_loss";
        case Strategy::cluster_top_loss: return "cluster_top_loss";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "random") return Strategy::random;
    if (name == "top_loss") return Strategy::top_loss;
    if (name == "cluster_top_loss") return Strategy::cluster_top_loss;
    throw ConfigError("unknown strategy '" + std::string(name) + "' (expected random, top_loss or cluster_top_loss)");
}

void ProgressionConfig::validate() const {
    if (block_size == 0) throw ConfigError("block_size must be at least 1");
    if (max_blocks_per_layer == 0) throw ConfigError("max_blocks_per_layer must be at least 1");
    if (max_layers == 0) throw ConfigError("max_layers must be at least 1");
    if (patience == 0) throw ConfigError("patience must be at least 1");
    if (!std::isfinite(improvement_epsilon)) throw ConfigError("epsilon must be finite");
    if (!subset_size && !(subset_fraction > 0.0 && subset_fraction <= 1.0))
        throw ConfigError("subset_fraction must lie in (0, 1]");
    if (subset_size && *subset_size == 0) throw ConfigError("subset_size must be at least 1");
    if (num_clusters && *num_clusters == 0) throw ConfigError("num_clusters must be at least 1");
    if (candidate_jobs == 0) throw ConfigError("candidate_jobs must be at least 1");
}

std::size_t subset_size_for(const ProgressionConfig& config, std::size_t n_train) {
    if (n_train == 0) return 0;
    std::size_t m = 0;
    if (config.subset_size) {
        m = *config.subset_size;
    } else {
        // The slack keeps 0.1 * 4000 from rounding up to 401.
        m = static_cast<std::size_t>(std::ceil(config.subset_fraction * static_cast<double>(n_train) - 1e-9));
    }
    return std::clamp<std::size_t>(m, 1, n_train);
}

bool improvement_tracker(std::span<const double> history, double epsilon, std::size_t patience) {
    if (patience == 0 || history.size() < patience + 1) return false;
    std::vector<bool> low(history.size(), false);
    double best = history.front();
    for (std::size_t i = 1; i < history.size(); ++i) {
        low[i] = history[i] - best < epsilon;
        best = std::max(best, history[i]);
    }
    return std::all_of(low.end() - static_cast<std::ptrdiff_t>(patience), low.end(), [](bool b) { return b; });
}

std::size_t modal_choice(std::span<const StepRecord> steps, std::size_t grid_size) {
    if (grid_size == 0) throw ConfigError("modal_choice: empty grid");
    std::vector<std::size_t> counts(grid_size, 0);
    for (const auto& s : steps)
        if (s.chosen < grid_size) ++counts[s.chosen];
    return static_cast<std::size_t>(std::distance(counts.begin(), std::max_element(counts.begin(), counts.end())));
}

RunResult run(const ProgressionConfig& config, const HyperGrid& grid, const Dataset& dataset, const DataSplit& split,
              const StepObserver& observer) {
    const auto run_start = Clock::now();
    config.validate();
    if (grid.size() == 0) throw ConfigError("hyperparameter grid is empty");

    const LabeledMatrix train = materialize(dataset, split.train);
    const LabeledMatrix val = materialize(dataset, split.val);
    const LabeledMatrix test = materialize(dataset, split.test);
    if (train.size() == 0 || val.size() == 0 || test.size() == 0)
        throw DataError("every split needs at least one sample");

    const std::size_t n_train = train.size();
    const std::size_t m = subset_size_for(config, n_train);
    const std::size_t clusters = config.num_clusters.value_or(dataset.num_classes());

    const Rng base(config.base_seed);
    const Rng init_base = base.derive({kInitDomain});
    const Rng select_base = base.derive({kSelectDomain});
    const Rng candidate_base = base.derive({kCandidateDomain});
    const Rng fine_tune_base = base.derive({kFineTuneDomain});

    RunResult result{Topology(dataset.dim(), dataset.num_classes()), {}};
    Topology& topology = result.topology;
    RunReport& report = result.report;
    report.subset_size = m;

    UniqueTracker tracker(n_train);
    std::vector<double> layer_history;
    std::size_t blocks_in_layer = 0;
    bool need_layer = true;
    const std::size_t max_steps = config.max_layers * config.max_blocks_per_layer;

    try {
        for (std::size_t k = 1; k <= max_steps; ++k) {
            StepRecord rec;
            rec.step = k;
            rec.val_accuracy_before = evaluate(topology, val).accuracy;

            // S_k is chosen against f_{k-1}, before the new block exists.
            const Rng select_rng = select_base.derive({k, strategy_tag(config.strategy)});
            Subset subset;
            if (config.strategy == Strategy::random) {
                subset = select_random(n_train, m, select_rng);
            } else {
                const SelectionContext ctx = compute_context(topology, train.features, train.labels, select_rng,
                                                             clusters, config.representation);
                subset = config.strategy == Strategy::top_loss ? select_top_loss(ctx, m)
                                                               : select_cluster_top_loss(ctx, m);
            }
            subset.step = k;

            Rng init_rng = init_base.derive({k});
            if (need_layer) {
                topology.start_new_layer(config.block_size, init_rng);
                layer_history.clear();
                blocks_in_layer = 0;
                need_layer = false;
            } else {
                topology.add_block(config.block_size, init_rng);
            }
            rec.layer = topology.layers().size() - 1;

            const auto t0 = Clock::now();
            const auto candidates =
                run_candidates(topology, subset, grid, train, val, candidate_base, k, {config.candidate_jobs, {}});
            rec.block_time_s = seconds_between(t0, Clock::now());

            rec.chosen = select_best(candidates);
            install_candidate(topology, candidates[rec.chosen]);
            topology.freeze_all();
            tracker.track(subset);

            for (const auto& c : candidates)
                rec.candidates.push_back({c.index, c.metrics.val_accuracy, c.metrics.val_loss, c.train_time_s,
                                          c.metrics.ok});
            rec.val_accuracy_after = candidates[rec.chosen].metrics.val_accuracy;
            rec.unique_count = tracker.unique_count();
            rec.subset = std::move(subset.indices);
            report.steps.push_back(std::move(rec));
            if (observer) observer(topology, report.steps.back());

            ++blocks_in_layer;
            layer_history.push_back(report.steps.back().val_accuracy_after);
            const bool saturated = blocks_in_layer >= config.max_blocks_per_layer ||
                                   improvement_tracker(layer_history, config.improvement_epsilon, config.patience);
            if (saturated) {
                if (topology.layers().size() >= config.max_layers) break;
                need_layer = true;
            }
        }

        FineTuneRecord& ft = report.fine_tune;
        ft.test_accuracy_before = evaluate(topology, test).accuracy;
        if (config.fine_tune_epochs > 0 && !report.steps.empty()) {
            ft.ran = true;
            ft.hyperparams_index = modal_choice(report.steps, grid.size());
            ft.epochs = config.fine_tune_epochs;
            FineTuneResult tuned = fine_tune(topology, train, val, grid[ft.hyperparams_index], config.fine_tune_epochs,
                                             fine_tune_base);
            ft.best_epoch = tuned.best_epoch;
            ft.val_accuracy_start = tuned.start_val_accuracy;
            ft.val_accuracy_best = tuned.best_val_accuracy;
            ft.time_s = tuned.wall_time_s;
            topology = std::move(tuned.topology);
        }

        const Evaluation final_eval = evaluate(topology, test);
        report.test_accuracy = final_eval.accuracy;
        report.test_loss = final_eval.loss;
        report.completed = true;
    } catch (const Error& e) {
        report.completed = false;
        report.error = e.what();
        topology.freeze_all();
    }
    summarize(report, topology);
    report.total_time_s = seconds_between(run_start, Clock::now());
    return result;
}

}  // namespace pnnl
