#pragma once

#include "pnnl/dataset.hpp"
#include "pnnl/hyperparams.hpp"
#include "pnnl/network.hpp"
#include "pnnl/numerics.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pnnl {

// A split materialized as a feature matrix plus labels.
struct LabeledMatrix {
    Matrix features;
    std::vector<std::uint32_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

LabeledMatrix materialize(const Dataset& dataset, std::span<const std::size_t> rows);

// Called with every training-row index that optimize_block reads.
using RowAccessObserver = std::function<void(std::size_t row)>;

struct TrainStats {
    double initial_subset_loss = 0.0;
    double final_subset_loss = 0.0;
    std::uint32_t epochs_run = 0;
    double wall_time_s = 0.0;
};

inline constexpr std::size_t kMaxBatchSize = 64;

// ---------------------------------------------------------------------------
// Loss/gradient kernels. Dropout masks hold 0 or 1/(1-p) per activation and
// are supplied by the caller so the kernels stay deterministic.
// ---------------------------------------------------------------------------

// Parameters trained in one progression step: the new block and the whole
// output layer (rows for frozen blocks first, the new block's rows last).
struct BlockParams {
    Matrix weight;
    std::vector<double> bias;
    Matrix output_weight;
    std::vector<double> output_bias;
};

struct BlockGradients {
    double loss = 0.0;
    BlockParams grad;
};

// Mean cross-entropy over the rows of `layer_input` (input to the last
// layer) and its gradient with respect to every BlockParams entry.
// `frozen_hidden` holds the activations of the last layer's frozen blocks.
BlockGradients block_loss_and_gradients(const BlockParams& params, const Matrix& layer_input,
                                        const Matrix& frozen_hidden, std::span<const std::uint32_t> labels,
                                        const Matrix* dropout_mask = nullptr);

struct NetworkParams {
    std::vector<DenseLayer> layers;
    Matrix output_weight;
    std::vector<double> output_bias;
};

struct NetworkGradients {
    double loss = 0.0;
    NetworkParams grad;
};

// Full backpropagation through every hidden layer; masks[l] applies to
// layer l's activations (empty span = no dropout).
NetworkGradients network_loss_and_gradients(const NetworkParams& params, const Matrix& x,
                                            std::span<const std::uint32_t> labels,
                                            std::span<const Matrix> dropout_masks = {});

// Inverted-dropout mask: each entry is 0 with probability `rate`, else 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

// ---------------------------------------------------------------------------
// Training operations
// ---------------------------------------------------------------------------

// Minimizes mean cross-entropy over the training rows listed in
// `subset_rows` with mini-batch Adam, updating only the trainable block and
// the output layer. Batch size min(64, M), reshuffled every epoch.
TrainStats optimize_block(Topology& topology, const LabeledMatrix& train, std::span<const std::size_t> subset_rows,
                          const HyperParams& hp, Rng rng, const RowAccessObserver& observer = {});

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

Evaluation evaluate(const Topology& topology, const Matrix& features, std::span<const std::uint32_t> labels);
inline Evaluation evaluate(const Topology& topology, const LabeledMatrix& data) {
    return evaluate(topology, data.features, data.labels);
}

struct FineTuneResult {
    Topology topology;
    double start_val_accuracy = 0.0;
    double best_val_accuracy = 0.0;
    std::uint32_t best_epoch = 0;   // 0 = the starting parameters were kept
    std::uint32_t epochs_run = 0;
    double wall_time_s = 0.0;
};

// Joint training of every parameter on the full training split. After each
// epoch the validation accuracy is measured; the best snapshot (the start
// included, earliest on ties) is returned with all blocks frozen.
FineTuneResult fine_tune(const Topology& topology, const LabeledMatrix& train, const LabeledMatrix& val,
                         const HyperParams& hp, std::uint32_t epochs, Rng rng);

}  // namespace pnnl
