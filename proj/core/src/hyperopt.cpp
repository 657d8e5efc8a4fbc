#include "pnnl/hyperopt.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace pnnl {

void HyperParams::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be a finite non-negative number");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw ConfigError("weight_decay must be a finite non-negative number");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
}

HyperGrid enumerate_grid(const GridLists& lists) {
    if (lists.learning_rates.empty()) throw ConfigError("learning_rates list is empty");
    if (lists.weight_decays.empty()) throw ConfigError("weight_decays list is empty");
    if (lists.dropout_rates.empty()) throw ConfigError("dropout_rates list is empty");
    if (lists.epochs.empty()) throw ConfigError("epochs list is empty");
    HyperGrid grid;
    for (double lr : lists.learning_rates)
        for (double wd : lists.weight_decays)
            for (double p : lists.dropout_rates)
                for (std::uint32_t e : lists.epochs) {
                    HyperParams hp{lr, wd, p, e};
                    hp.validate();
                    if (std::find(grid.combos.begin(), grid.combos.end(), hp) != grid.combos.end())
                        throw ConfigError("hyperparameter grid contains a duplicate combination");
                    grid.combos.push_back(hp);
                }
    return grid;
}

namespace {

CandidateResult train_candidate(const Topology& topology, const Subset& subset, const HyperParams& hp,
                                const LabeledMatrix& train, const LabeledMatrix& val, Rng rng, std::size_t h) {
    const auto start = std::chrono::steady_clock::now();
    CandidateResult r;
    r.index = h;
    try {
        Topology copy = topology;
        r.stats = optimize_block(copy, train, subset.indices, hp, rng);
        const Evaluation e = evaluate(copy, val);
        r.metrics = {e.accuracy, e.loss, true};
        r.block = copy.trainable_block();
        r.output_weight = copy.output_weight();
        r.output_bias = copy.output_bias();
    } catch (const Error& e) {
        r.metrics.ok = false;
        r.error = e.what();
    }
    r.train_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

std::vector<CandidateResult> run_candidates(const Topology& topology, const Subset& subset, const HyperGrid& grid,
                                            const LabeledMatrix& train, const LabeledMatrix& val, Rng stream_base,
                                            std::size_t step, const CandidateOptions& options) {
    if (topology.trainable_block_count() != 1)
        throw TrainingError("run_candidates: topology must hold exactly one trainable block");
    const std::size_t q = grid.size();
    if (q == 0) throw ConfigError("run_candidates: empty hyperparameter grid");

    std::vector<std::size_t> order = options.execution_order;
    if (order.empty()) {
        order.resize(q);
        std::iota(order.begin(), order.end(), 0);
    }
    std::vector<std::size_t> check = order;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < q; ++i)
        if (check.size() != q || check[i] != i) throw ConfigError("execution_order must be a permutation of 0..Q-1");

    std::vector<CandidateResult> results(q);
    auto work = [&](std::size_t h) {
        results[h] = train_candidate(topology, subset, grid[h], train, val, stream_base.derive({step, h}), h);
    };

    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, q);
    if (jobs == 1) {
        for (std::size_t h : order) work(h);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        workers.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < q; i = next.fetch_add(1)) work(order[i]);
            });
        }
    }
    return results;
}

std::size_t select_best(std::span<const CandidateMetrics> metrics) {
    if (metrics.empty()) throw TrainingError("select_best: no candidates");
    std::size_t best = metrics.size();
    for (std::size_t h = 0; h < metrics.size(); ++h) {
        const auto& m = metrics[h];
        if (!m.ok) continue;
        if (best == metrics.size()) {
            best = h;
            continue;
        }
        const auto& b = metrics[best];
        if (m.val_accuracy > b.val_accuracy || (m.val_accuracy == b.val_accuracy && m.val_loss < b.val_loss))
            best = h;
    }
    if (best == metrics.size()) throw TrainingError("select_best: every candidate failed");
    return best;
}

std::size_t select_best(std::span<const CandidateResult> results) {
    std::vector<CandidateMetrics> metrics;
    metrics.reserve(results.size());
    for (const auto& r : results) metrics.push_back(r.metrics);
    return select_best(metrics);
}

void install_candidate(Topology& topology, const CandidateResult& candidate) {
    if (!candidate.metrics.ok) throw TrainingError("cannot install a failed candidate");
    Block& block = topology.trainable_block();
    if (candidate.block.weight.rows() != block.weight.rows() || candidate.block.weight.cols() != block.weight.cols() ||
        candidate.output_weight.rows() != topology.output_weight().rows())
        throw DimensionError("candidate parameters do not fit the topology");
    block.weight = candidate.block.weight;
    block.bias = candidate.block.bias;
    topology.mutable_output_weight() = candidate.output_weight;
    topology.mutable_output_bias() = candidate.output_bias;
}

}  // namespace pnnl
