#include "pnnl/network.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pnnl {

std::size_t Layer::width() const noexcept {
    std::size_t w = 0;
    for (const auto& b : blocks) w += b.width();
    return w;
}

Topology::Topology(std::size_t input_dim, std::uint32_t num_classes)
    : input_dim_(input_dim), num_classes_(num_classes), output_weight_(0, num_classes),
      output_bias_(num_classes, 0.0) {
    if (input_dim == 0) throw DimensionError("topology input width must be positive");
    if (num_classes < 2) throw DimensionError("topology needs at least 2 classes");
}

bool Topology::has_trainable_block() const noexcept { return trainable_block_count() > 0; }

std::size_t Topology::trainable_block_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_)
        for (const auto& b : layer.blocks)
            if (!b.frozen) ++n;
    return n;
}

void Topology::require_all_frozen(const char* op) const {
    if (has_trainable_block())
        throw TrainingError(std::string(op) + ": an unfrozen block is already present");
}

Block he_uniform_block(std::size_t input_dim, std::size_t width, Rng& rng) {
    if (input_dim == 0 || width == 0) throw DimensionError("block dimensions must be positive");
    Block b;
    b.weight = Matrix(input_dim, width);
    b.bias.assign(width, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(input_dim));
    for (double& w : b.weight.values()) w = (2.0 * rng.uniform() - 1.0) * limit;
    return b;
}

void Topology::add_block(std::size_t block_size, Rng& rng) {
    if (layers_.empty()) throw TrainingError("add_block: topology has no layer yet");
    require_all_frozen("add_block");
    Layer& last = layers_.back();
    if (!last.blocks.empty() && last.blocks.front().width() != block_size)
        throw ConfigError("add_block: block size differs from the layer's existing blocks");
    last.blocks.push_back(he_uniform_block(last.input_dim(), block_size, rng));

    Matrix grown(output_weight_.rows() + block_size, num_classes_);
    for (std::size_t r = 0; r < output_weight_.rows(); ++r)
        std::copy(output_weight_.row(r).begin(), output_weight_.row(r).end(), grown.row(r).begin());
    output_weight_ = std::move(grown);
    ++step_count_;
}

void Topology::start_new_layer(std::size_t block_size, Rng& rng) {
    require_all_frozen("start_new_layer");
    const std::size_t d_in = layers_.empty() ? input_dim_ : layers_.back().width();
    Layer layer;
    layer.blocks.push_back(he_uniform_block(d_in, block_size, rng));
    layers_.push_back(std::move(layer));
    output_weight_ = Matrix(block_size, num_classes_);
    output_bias_.assign(num_classes_, 0.0);
    ++step_count_;
}

void Topology::freeze_all() noexcept {
    for (auto& layer : layers_)
        for (auto& b : layer.blocks) b.frozen = true;
}

void Topology::unfreeze_all() noexcept {
    for (auto& layer : layers_)
        for (auto& b : layer.blocks) b.frozen = false;
}

Block& Topology::trainable_block() {
    return const_cast<Block&>(std::as_const(*this).trainable_block());
}

const Block& Topology::trainable_block() const {
    if (trainable_block_count() != 1)
        throw TrainingError("expected exactly one trainable block, found " + std::to_string(trainable_block_count()));
    // Growth only ever appends, so the trainable block is the last one.
    const Block& b = layers_.back().blocks.back();
    if (b.frozen) throw TrainingError("trainable block is not the most recently added block");
    return b;
}

std::vector<DenseLayer> Topology::dense_layers() const {
    std::vector<DenseLayer> out;
    out.reserve(layers_.size());
    for (const auto& layer : layers_) {
        DenseLayer d{Matrix(layer.input_dim(), layer.width()), {}};
        std::size_t col = 0;
        for (const auto& b : layer.blocks) {
            d.weight.set_column_block(col, b.weight);
            d.bias.insert(d.bias.end(), b.bias.begin(), b.bias.end());
            col += b.width();
        }
        out.push_back(std::move(d));
    }
    return out;
}

void Topology::assign_dense(const std::vector<DenseLayer>& dense, const Matrix& output_weight,
                            std::vector<double> output_bias) {
    if (dense.size() != layers_.size()) throw DimensionError("assign_dense: layer count mismatch");
    if (output_weight.rows() != output_weight_.rows() || output_weight.cols() != output_weight_.cols() ||
        output_bias.size() != output_bias_.size())
        throw DimensionError("assign_dense: output layer shape mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& layer = layers_[l];
        if (dense[l].weight.rows() != layer.input_dim() || dense[l].weight.cols() != layer.width() ||
            dense[l].bias.size() != layer.width())
            throw DimensionError("assign_dense: layer " + std::to_string(l) + " shape mismatch");
        std::size_t col = 0;
        for (auto& b : layer.blocks) {
            b.weight = dense[l].weight.column_block(col, b.width());
            std::copy_n(dense[l].bias.begin() + static_cast<std::ptrdiff_t>(col), b.width(), b.bias.begin());
            col += b.width();
        }
    }
    output_weight_ = output_weight;
    output_bias_ = std::move(output_bias);
}

Topology Topology::from_parts(std::size_t input_dim, std::uint32_t num_classes, std::vector<Layer> layers,
                              Matrix output_weight, std::vector<double> output_bias) {
    Topology t(input_dim, num_classes);
    std::size_t d_in = input_dim;
    std::size_t blocks = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].blocks.empty()) throw DimensionError("layer " + std::to_string(l) + " has no blocks");
        for (const auto& b : layers[l].blocks) {
            if (b.weight.rows() != d_in || b.weight.cols() != b.bias.size() || b.bias.empty())
                throw DimensionError("layer " + std::to_string(l) + " block shape inconsistent");
            ++blocks;
        }
        d_in = layers[l].width();
    }
    const std::size_t last = layers.empty() ? 0 : d_in;
    if (output_weight.rows() != last || output_weight.cols() != num_classes || output_bias.size() != num_classes)
        throw DimensionError("output layer shape inconsistent with last layer width");
    t.layers_ = std::move(layers);
    t.output_weight_ = std::move(output_weight);
    t.output_bias_ = std::move(output_bias);
    t.step_count_ = blocks;
    return t;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------
Matrix layer_forward(const Layer& layer, const Matrix& input) {
    if (input.cols() != layer.input_dim())
        throw DimensionError("layer expects " + std::to_string(layer.input_dim()) + " inputs, got " +
                             std::to_string(input.cols()));
    Matrix out(input.rows(), layer.width());
    std::size_t col = 0;
    for (const auto& b : layer.blocks) {
        Matrix z = matmul(input, b.weight);
        add_row_vector(z, b.bias);
        for (double& v : z.values()) v = std::max(0.0, v);
        out.set_column_block(col, z);
        col += b.width();
    }
    return out;
}

Matrix hidden_forward(const Topology& topology, const Matrix& x) {
    if (x.cols() != topology.input_dim())
        throw DimensionError("network expects " + std::to_string(topology.input_dim()) + " features, got " +
                             std::to_string(x.cols()));
    if (topology.layers().empty()) return Matrix(x.rows(), 0);
    Matrix h = layer_forward(topology.layers().front(), x);
    for (std::size_t l = 1; l < topology.layers().size(); ++l) h = layer_forward(topology.layers()[l], h);
    return h;
}

Matrix output_forward(const Topology& topology, const Matrix& last_hidden) {
    Matrix logits = matmul(last_hidden, topology.output_weight());
    add_row_vector(logits, topology.output_bias());
    return logits;
}

Forward forward(const Topology& topology, const Matrix& x) {
    Forward f;
    f.last_hidden = hidden_forward(topology, x);
    f.logits = output_forward(topology, f.last_hidden);
    f.probabilities = softmax_rows(f.logits);
    return f;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& logits) {
    std::vector<std::uint32_t> out(logits.rows(), 0);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        // max_element returns the first maximum.
        out[r] = static_cast<std::uint32_t>(std::distance(row.begin(), std::max_element(row.begin(), row.end())));
    }
    return out;
}

std::vector<std::uint32_t> predict(const Topology& topology, const Matrix& x) {
    return argmax_rows(output_forward(topology, hidden_forward(topology, x)));
}

std::size_t param_count(const Topology& topology) {
    std::size_t n = topology.output_weight().size() + topology.output_bias().size();
    for (const auto& layer : topology.layers())
        for (const auto& b : layer.blocks) n += b.weight.size() + b.bias.size();
    return n;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------
namespace {

constexpr std::array<std::uint8_t, 4> kModelMagic{'P', 'M', 'L', 'P'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

void put_f64s(std::vector<std::uint8_t>& out, std::span<const double> values) {
    for (double v : values) put_f64(out, v);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) throw DataError("PMLP model truncated");
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return value;
    }

    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    void get_f64s(std::span<double> out) {
        for (double& v : out) v = get_f64();
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const Topology& topology) {
    std::vector<std::uint8_t> out(kModelMagic.begin(), kModelMagic.end());
    put_le<std::uint16_t>(out, kModelFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(topology.input_dim()));
    put_le<std::uint32_t>(out, topology.num_classes());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(topology.layers().size()));
    for (const auto& layer : topology.layers()) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.blocks.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.blocks.front().width()));
    }
    for (const auto& layer : topology.layers()) {
        for (const auto& b : layer.blocks) {
            put_f64s(out, b.weight.values());
            put_f64s(out, b.bias);
        }
    }
    put_f64s(out, topology.output_weight().values());
    put_f64s(out, topology.output_bias());
    return out;
}

Topology decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin()))
        throw DataError("not a PMLP model (bad magic)");
    Reader in(bytes.subspan(4));
    const auto version = in.get<std::uint16_t>();
    if (version != kModelFormatVersion)
        throw DataError("PMLP model version " + std::to_string(version) + " unsupported");
    const std::size_t d = in.get<std::uint32_t>();
    const std::uint32_t k = in.get<std::uint32_t>();
    const std::size_t n_layers = in.get<std::uint32_t>();
    if (n_layers > in.remaining() / 8) throw DataError("PMLP model truncated (layer table)");
    std::vector<std::pair<std::size_t, std::size_t>> shape(n_layers);
    for (auto& [count, size] : shape) {
        count = in.get<std::uint32_t>();
        size = in.get<std::uint32_t>();
        if (count == 0 || size == 0) throw DataError("PMLP model has an empty layer");
    }
    std::vector<Layer> layers(n_layers);
    std::size_t d_in = d;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto [count, size] = shape[l];
        if (d_in * size > in.remaining() / 8) throw DataError("PMLP model truncated");
        for (std::size_t b = 0; b < count; ++b) {
            Block block;
            block.weight = Matrix(d_in, size);
            block.bias.assign(size, 0.0);
            block.frozen = true;
            in.get_f64s(block.weight.values());
            in.get_f64s(block.bias);
            layers[l].blocks.push_back(std::move(block));
        }
        d_in = count * size;
    }
    const std::size_t last = n_layers == 0 ? 0 : d_in;
    Matrix out_w(last, k);
    std::vector<double> out_b(k);
    if ((out_w.size() + out_b.size()) > in.remaining() / 8) throw DataError("PMLP model truncated");
    in.get_f64s(out_w.values());
    in.get_f64s(out_b);
    if (in.remaining() != 0) throw DataError("PMLP model has trailing bytes");
    return Topology::from_parts(d, k, std::move(layers), std::move(out_w), std::move(out_b));
}

void save_model(const Topology& topology, const std::filesystem::path& path) {
    const auto bytes = encode_model(topology);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing model file: " + path.string());
}

Topology load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return decode_model(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> frozen_block_bytes(const Topology& topology) {
    std::vector<std::uint8_t> out;
    for (const auto& layer : topology.layers()) {
        for (const auto& b : layer.blocks) {
            if (!b.frozen) continue;
            put_f64s(out, b.weight.values());
            put_f64s(out, b.bias);
        }
    }
    return out;
}

}  // namespace pnnl
