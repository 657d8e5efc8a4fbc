#pragma once

#include "pnnl/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pnnl {

// A fixed-width group of rectifier neurons added in one progression step.
struct Block {
    Matrix weight;              // d_in x width
    std::vector<double> bias;   // width
    bool frozen = false;

    std::size_t width() const noexcept { return bias.size(); }
    std::size_t input_dim() const noexcept { return weight.rows(); }

    friend bool operator==(const Block&, const Block&) = default;
};

struct Layer {
    std::vector<Block> blocks;

    std::size_t width() const noexcept;
    std::size_t input_dim() const noexcept { return blocks.empty() ? 0 : blocks.front().input_dim(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

// Weights of a whole layer with its blocks concatenated column-wise.
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;
};

// The progressive network: hidden layers of blocks followed by an affine
// output layer. With zero layers the logits are the output bias alone.
//
// Invariants kept by every mutating member:
//   layer 0 consumes the input width, layer l > 0 consumes width(l - 1);
//   output_weight().rows() == width of the last layer (0 with no layers).
class Topology {
public:
    Topology() = default;
    Topology(std::size_t input_dim, std::uint32_t num_classes);

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::uint32_t num_classes() const noexcept { return num_classes_; }
    std::size_t step_count() const noexcept { return step_count_; }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const Matrix& output_weight() const noexcept { return output_weight_; }
    const std::vector<double>& output_bias() const noexcept { return output_bias_; }

    std::size_t last_width() const noexcept { return layers_.empty() ? 0 : layers_.back().width(); }
    bool has_trainable_block() const noexcept;
    std::size_t trainable_block_count() const noexcept;

    // Appends a He-uniform block to the last layer; its output rows start at
    // zero so the network function is unchanged until it is trained.
    void add_block(std::size_t block_size, Rng& rng);
    // Appends a layer holding one trainable block and replaces the output
    // layer with a zero-initialized one of matching width.
    void start_new_layer(std::size_t block_size, Rng& rng);
    void freeze_all() noexcept;
    void unfreeze_all() noexcept;

    // The only trainable block; throws TrainingError unless exactly one exists.
    Block& trainable_block();
    const Block& trainable_block() const;
    Matrix& mutable_output_weight() noexcept { return output_weight_; }
    std::vector<double>& mutable_output_bias() noexcept { return output_bias_; }

    std::vector<DenseLayer> dense_layers() const;
    // Writes dense weights back into the blocks. Shapes must match exactly.
    void assign_dense(const std::vector<DenseLayer>& dense, const Matrix& output_weight,
                      std::vector<double> output_bias);

    // Model file reconstruction; validates every shape.
    static Topology from_parts(std::size_t input_dim, std::uint32_t num_classes, std::vector<Layer> layers,
                               Matrix output_weight, std::vector<double> output_bias);

    friend bool operator==(const Topology&, const Topology&) = default;

private:
    void require_all_frozen(const char* op) const;

    std::size_t input_dim_ = 0;
    std::uint32_t num_classes_ = 0;
    std::vector<Layer> layers_;
    Matrix output_weight_;
    std::vector<double> output_bias_;
    std::size_t step_count_ = 0;
};

// Entries uniform in [-sqrt(6/d_in), +sqrt(6/d_in)], drawn row-major; zero bias.
Block he_uniform_block(std::size_t input_dim, std::size_t width, Rng& rng);

// relu(input . W_b + b_b) for every block, placed side by side.
Matrix layer_forward(const Layer& layer, const Matrix& input);
// Activations of the last hidden layer (input itself when there are no layers).
Matrix hidden_forward(const Topology& topology, const Matrix& x);
Matrix output_forward(const Topology& topology, const Matrix& last_hidden);

struct Forward {
    Matrix logits;
    Matrix last_hidden;
    Matrix probabilities;
};

Forward forward(const Topology& topology, const Matrix& x);

// argmax of each logits row, lowest index on ties.
std::vector<std::uint32_t> argmax_rows(const Matrix& logits);
std::vector<std::uint32_t> predict(const Topology& topology, const Matrix& x);

std::size_t param_count(const Topology& topology);

// Weights and biases of every frozen block as raw bytes, in layer/block order.
std::vector<std::uint8_t> frozen_block_bytes(const Topology& topology);

// PMLP model format, little-endian:
//   "PMLP" | u16 version=1 | u32 D | u32 K | u32 layers |
//   per layer: u32 block count, u32 block size |
//   binary64 parameters: per block weight row-major then bias, then output
//   weight row-major, then output bias.
inline constexpr std::uint16_t kModelFormatVersion = 1;
std::vector<std::uint8_t> encode_model(const Topology& topology);
Topology decode_model(std::span<const std::uint8_t> bytes);
void save_model(const Topology& topology, const std::filesystem::path& path);
Topology load_model(const std::filesystem::path& path);

}  // namespace pnnl
