#include "pnnl/trainer.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

namespace pnnl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    return std::max(s, 1e-9);
}

void relu_inplace(Matrix& m) {
    for (double& v : m.values()) v = std::max(0.0, v);
}

void multiply_inplace(Matrix& m, const Matrix& by) {
    auto a = m.values();
    const auto b = by.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
}

// Zeroes gradient entries whose pre-activation was not positive.
void relu_backward_inplace(Matrix& grad, const Matrix& pre_activation) {
    auto g = grad.values();
    const auto z = pre_activation.values();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(z[i] > 0.0)) g[i] = 0.0;
}

void check_mask(const Matrix& mask, std::size_t rows, std::size_t cols) {
    if (mask.rows() != rows || mask.cols() != cols) throw DimensionError("dropout mask shape mismatch");
}

std::vector<std::uint32_t> gather_labels(std::span<const std::uint32_t> labels, std::span<const std::size_t> rows) {
    std::vector<std::uint32_t> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(labels[r]);
    return out;
}

}  // namespace

LabeledMatrix materialize(const Dataset& dataset, std::span<const std::size_t> rows) {
    return {dataset.features().gather_rows(rows), gather_labels(dataset.labels(), rows)};
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Matrix mask(rows, cols, 1.0);
    if (rate <= 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep_scale;
    return mask;
}

// ---------------------------------------------------------------------------
// Block kernel
// ---------------------------------------------------------------------------
BlockGradients block_loss_and_gradients(const BlockParams& params, const Matrix& layer_input,
                                        const Matrix& frozen_hidden, std::span<const std::uint32_t> labels,
                                        const Matrix* mask) {
    const std::size_t n = layer_input.rows();
    const std::size_t width = params.bias.size();
    const std::size_t frozen_width = frozen_hidden.cols();
    if (frozen_hidden.rows() != n) throw DimensionError("frozen activations row count mismatch");
    if (params.output_weight.rows() != frozen_width + width)
        throw DimensionError("output weight rows do not match last-layer width");

    Matrix pre = matmul(layer_input, params.weight);
    add_row_vector(pre, params.bias);
    Matrix act = pre;
    relu_inplace(act);
    if (mask) {
        check_mask(*mask, n, width);
        multiply_inplace(act, *mask);
    }

    Matrix hidden(n, frozen_width + width);
    hidden.set_column_block(0, frozen_hidden);
    hidden.set_column_block(frozen_width, act);
    Matrix logits = matmul(hidden, params.output_weight);
    add_row_vector(logits, params.output_bias);

    CrossEntropy ce = softmax_cross_entropy(logits, labels);
    BlockGradients out;
    out.loss = ce.loss;
    out.grad.output_weight = matmul_tn(hidden, ce.grad_logits);
    out.grad.output_bias = column_sums(ce.grad_logits);

    const Matrix new_rows = params.output_weight.transposed().column_block(frozen_width, width);
    Matrix d_act = matmul(ce.grad_logits, new_rows);
    if (mask) multiply_inplace(d_act, *mask);
    relu_backward_inplace(d_act, pre);
    out.grad.weight = matmul_tn(layer_input, d_act);
    out.grad.bias = column_sums(d_act);
    return out;
}

// ---------------------------------------------------------------------------
// Whole-network kernel
// ---------------------------------------------------------------------------
NetworkGradients network_loss_and_gradients(const NetworkParams& params, const Matrix& x,
                                            std::span<const std::uint32_t> labels,
                                            std::span<const Matrix> masks) {
    const std::size_t depth = params.layers.size();
    if (!masks.empty() && masks.size() != depth) throw DimensionError("one dropout mask per layer required");

    std::vector<Matrix> inputs;   // input to layer l
    std::vector<Matrix> pres;     // pre-activation of layer l
    inputs.reserve(depth + 1);
    pres.reserve(depth);
    inputs.push_back(x);
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix pre = matmul(inputs.back(), params.layers[l].weight);
        add_row_vector(pre, params.layers[l].bias);
        Matrix act = pre;
        relu_inplace(act);
        if (!masks.empty()) {
            check_mask(masks[l], act.rows(), act.cols());
            multiply_inplace(act, masks[l]);
        }
        pres.push_back(std::move(pre));
        inputs.push_back(std::move(act));
    }
    const Matrix& last = inputs.back();
    Matrix logits = depth == 0 ? Matrix(x.rows(), params.output_bias.size()) : matmul(last, params.output_weight);
    add_row_vector(logits, params.output_bias);

    CrossEntropy ce = softmax_cross_entropy(logits, labels);
    NetworkGradients out;
    out.loss = ce.loss;
    out.grad.output_bias = column_sums(ce.grad_logits);
    out.grad.layers.resize(depth);
    if (depth == 0) {
        out.grad.output_weight = Matrix(0, params.output_bias.size());
        return out;
    }
    out.grad.output_weight = matmul_tn(last, ce.grad_logits);
    Matrix d_act = matmul_nt(ce.grad_logits, params.output_weight);
    for (std::size_t l = depth; l-- > 0;) {
        if (!masks.empty()) multiply_inplace(d_act, masks[l]);
        relu_backward_inplace(d_act, pres[l]);
        out.grad.layers[l].weight = matmul_tn(inputs[l], d_act);
        out.grad.layers[l].bias = column_sums(d_act);
        if (l > 0) d_act = matmul_nt(d_act, params.layers[l].weight);
    }
    return out;
}

// ---------------------------------------------------------------------------
// optimize_block
// ---------------------------------------------------------------------------
TrainStats optimize_block(Topology& topology, const LabeledMatrix& train, std::span<const std::size_t> subset_rows,
                          const HyperParams& hp, Rng rng, const RowAccessObserver& observer) {
    const auto start = Clock::now();
    hp.validate();
    if (subset_rows.empty()) throw TrainingError("optimize_block: empty subset");
    Block& block = topology.trainable_block();
    for (std::size_t r : subset_rows) {
        if (r >= train.size()) throw DimensionError("optimize_block: subset index outside the training split");
        if (observer) observer(r);
    }

    // Everything upstream of the trainable block is frozen, so its inputs and
    // the sibling activations are computed once for the subset rows.
    const auto& layers = topology.layers();
    Matrix layer_input = train.features.gather_rows(subset_rows);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) layer_input = layer_forward(layers[l], layer_input);
    Layer siblings;
    siblings.blocks.assign(layers.back().blocks.begin(), layers.back().blocks.end() - 1);
    const Matrix frozen_hidden =
        siblings.blocks.empty() ? Matrix(layer_input.rows(), 0) : layer_forward(siblings, layer_input);
    const std::vector<std::uint32_t> labels = gather_labels(train.labels, subset_rows);

    BlockParams params{block.weight, block.bias, topology.output_weight(), topology.output_bias()};
    const std::array<std::size_t, 4> sizes{params.weight.size(), params.bias.size(), params.output_weight.size(),
                                           params.output_bias.size()};
    AdamState adam(sizes);

    TrainStats stats;
    stats.initial_subset_loss = block_loss_and_gradients(params, layer_input, frozen_hidden, labels).loss;

    const std::size_t m = subset_rows.size();
    const std::size_t batch = std::min(kMaxBatchSize, m);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    for (std::uint32_t epoch = 0; epoch < hp.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t first = 0; first < m; first += batch) {
            const std::span<const std::size_t> idx(order.data() + first, std::min(batch, m - first));
            const Matrix xb = layer_input.gather_rows(idx);
            const Matrix fb = frozen_hidden.gather_rows(idx);
            const std::vector<std::uint32_t> yb = gather_labels(labels, idx);
            std::optional<Matrix> mask;
            if (hp.dropout_rate > 0.0) mask = dropout_mask(idx.size(), params.bias.size(), hp.dropout_rate, rng);
            BlockGradients g = block_loss_and_gradients(params, xb, fb, yb, mask ? &*mask : nullptr);

            const std::array<std::span<double>, 4> p{params.weight.values(), std::span<double>(params.bias),
                                                     params.output_weight.values(),
                                                     std::span<double>(params.output_bias)};
            const std::array<std::span<const double>, 4> d{g.grad.weight.values(), std::span<const double>(g.grad.bias),
                                                           g.grad.output_weight.values(),
                                                           std::span<const double>(g.grad.output_bias)};
            adam.apply(p, d, hp.learning_rate, hp.weight_decay);
        }
        ++stats.epochs_run;
    }
    stats.final_subset_loss = block_loss_and_gradients(params, layer_input, frozen_hidden, labels).loss;
    if (!std::isfinite(stats.final_subset_loss)) throw TrainingError("optimize_block: training diverged");

    block.weight = std::move(params.weight);
    block.bias = std::move(params.bias);
    topology.mutable_output_weight() = std::move(params.output_weight);
    topology.mutable_output_bias() = std::move(params.output_bias);
    stats.wall_time_s = seconds_since(start);
    return stats;
}

Evaluation evaluate(const Topology& topology, const Matrix& features, std::span<const std::uint32_t> labels) {
    if (features.rows() != labels.size()) throw DimensionError("evaluate: feature rows and labels differ in count");
    if (labels.empty()) return {};
    const Matrix logits = output_forward(topology, hidden_forward(topology, features));
    const auto predicted = argmax_rows(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
    Evaluation e;
    e.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    e.loss = softmax_cross_entropy(logits, labels).loss;
    return e;
}

// ---------------------------------------------------------------------------
// fine_tune
// ---------------------------------------------------------------------------
FineTuneResult fine_tune(const Topology& topology, const LabeledMatrix& train, const LabeledMatrix& val,
                         const HyperParams& hp, std::uint32_t epochs, Rng rng) {
    const auto start = Clock::now();
    hp.validate();
    if (train.size() == 0) throw TrainingError("fine_tune: empty training split");

    FineTuneResult result{topology, 0.0, 0.0, 0, 0, 0.0};
    result.topology.freeze_all();
    result.start_val_accuracy = evaluate(result.topology, val).accuracy;
    result.best_val_accuracy = result.start_val_accuracy;

    Topology working = result.topology;
    NetworkParams params{working.dense_layers(), working.output_weight(), working.output_bias()};
    std::vector<std::size_t> sizes;
    for (const auto& l : params.layers) {
        sizes.push_back(l.weight.size());
        sizes.push_back(l.bias.size());
    }
    sizes.push_back(params.output_weight.size());
    sizes.push_back(params.output_bias.size());
    AdamState adam(sizes);

    const std::size_t n = train.size();
    const std::size_t batch = std::min(kMaxBatchSize, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::uint32_t epoch = 1; epoch <= epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t first = 0; first < n; first += batch) {
            const std::span<const std::size_t> idx(order.data() + first, std::min(batch, n - first));
            const Matrix xb = train.features.gather_rows(idx);
            const std::vector<std::uint32_t> yb = gather_labels(train.labels, idx);
            std::vector<Matrix> masks;
            if (hp.dropout_rate > 0.0)
                for (const auto& l : params.layers)
                    masks.push_back(dropout_mask(idx.size(), l.bias.size(), hp.dropout_rate, rng));
            NetworkGradients g = network_loss_and_gradients(params, xb, yb, masks);

            std::vector<std::span<double>> p;
            std::vector<std::span<const double>> d;
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                p.push_back(params.layers[l].weight.values());
                p.push_back(params.layers[l].bias);
                d.push_back(g.grad.layers[l].weight.values());
                d.push_back(g.grad.layers[l].bias);
            }
            p.push_back(params.output_weight.values());
            p.push_back(params.output_bias);
            d.push_back(g.grad.output_weight.values());
            d.push_back(g.grad.output_bias);
            adam.apply(p, d, hp.learning_rate, hp.weight_decay);
        }
        ++result.epochs_run;
        // A diverged epoch ends fine-tuning; the best snapshot so far stands.
        const bool finite = params.output_weight.all_finite() &&
                            std::all_of(params.layers.begin(), params.layers.end(),
                                        [](const DenseLayer& l) { return l.weight.all_finite(); });
        if (!finite) break;
        working.assign_dense(params.layers, params.output_weight, params.output_bias);
        const double acc = evaluate(working, val).accuracy;
        if (acc > result.best_val_accuracy) {
            result.best_val_accuracy = acc;
            result.best_epoch = epoch;
            result.topology = working;
        }
    }
    result.topology.freeze_all();
    result.wall_time_s = seconds_since(start);
    return result;
}

}  // namespace pnnl
