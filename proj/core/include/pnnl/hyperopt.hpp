#pragma once

#include "pnnl/hyperparams.hpp"
#include "pnnl/network.hpp"
#include "pnnl/sampling.hpp"
#include "pnnl/trainer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pnnl {

struct GridLists {
    std::vector<double> learning_rates;
    std::vector<double> weight_decays;
    std::vector<double> dropout_rates;
    std::vector<std::uint32_t> epochs;
};

// The ordered set of Q hyperparameter combinations.
struct HyperGrid {
    std::vector<HyperParams> combos;

    std::size_t size() const noexcept { return combos.size(); }
    const HyperParams& operator[](std::size_t h) const { return combos.at(h); }
};

// Cartesian product; learning rate varies slowest, epochs fastest.
HyperGrid enumerate_grid(const GridLists& lists);

struct CandidateMetrics {
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    bool ok = true;
};

struct CandidateResult {
    std::size_t index = 0;
    CandidateMetrics metrics;
    // Trained parameters: the new block plus the whole output layer.
    Block block;
    Matrix output_weight;
    std::vector<double> output_bias;
    TrainStats stats;
    double train_time_s = 0.0;
    std::string error;   // set when !metrics.ok
};

struct CandidateOptions {
    std::size_t jobs = 1;
    // Execution order over candidate indices; empty = 0..Q-1. Results are
    // returned by index regardless.
    std::vector<std::size_t> execution_order;
};

// Trains one independent copy of `topology` per combination on the same
// subset, candidate h drawing from stream_base.derive({step, h}), and scores
// each on the validation split.
std::vector<CandidateResult> run_candidates(const Topology& topology, const Subset& subset, const HyperGrid& grid,
                                            const LabeledMatrix& train, const LabeledMatrix& val, Rng stream_base,
                                            std::size_t step, const CandidateOptions& options = {});

// argmax validation accuracy; ties -> lower validation loss -> lower index.
// Failed candidates are skipped; throws TrainingError if none succeeded.
std::size_t select_best(std::span<const CandidateMetrics> metrics);
std::size_t select_best(std::span<const CandidateResult> results);

// Copies the candidate's parameters into the topology's trainable block and
// output layer bit-for-bit.
void install_candidate(Topology& topology, const CandidateResult& candidate);

}  // namespace pnnl
