#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace pnnl {

// Dense row-major matrix of doubles. Value type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    // Rows selected by index, in the given order.
    Matrix gather_rows(std::span<const std::size_t> indices) const;
    // Column block [first, first + count).
    Matrix column_block(std::size_t first, std::size_t count) const;
    void set_column_block(std::size_t first, const Matrix& block);
    Matrix transposed() const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Standard product a·b. Each output entry is accumulated over the inner
// dimension in increasing index order, so results are reproducible.
Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Adds bias[j] to every row's column j.
void add_row_vector(Matrix& m, std::span<const double> bias);
// Column sums, accumulated in row order.
std::vector<double> column_sums(const Matrix& m);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

struct CrossEntropy {
    double loss = 0.0;                 // mean of per_sample
    Matrix grad_logits;                // (softmax - onehot) / n
    std::vector<double> per_sample;    // -log softmax(logit)[label]
};

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels);

// ---------------------------------------------------------------------------
// splitmix64: the single random source. Streams for independent consumers
// come from derive(), never from sharing one generator.
// ---------------------------------------------------------------------------
std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

class Rng {
public:
    Rng() = default;
    explicit Rng(std::uint64_t state) noexcept : state_(state) {}

    std::uint64_t state() const noexcept { return state_; }

    std::uint64_t next_u64() noexcept;
    // High 53 bits scaled to [0, 1).
    double uniform() noexcept;
    // floor(uniform() * n), in [0, n). n must be > 0.
    std::size_t below(std::size_t n) noexcept;

    // Independent stream: folds each tag through the finalizer in order.
    // Does not advance *this.
    Rng derive(std::span<const std::uint64_t> tags) const noexcept;
    Rng derive(std::initializer_list<std::uint64_t> tags) const noexcept;

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_ = 0;
};

// In-place Fisher–Yates, i from n-1 down to 1, j = below(i + 1).
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(items[i - 1], items[j]);
    }
}

// ---------------------------------------------------------------------------
// Adam with decoupled weight decay.
// ---------------------------------------------------------------------------
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    // One accumulator pair per parameter tensor, sized like it.
    explicit AdamState(std::span<const std::size_t> sizes, AdamConfig config = {});

    std::size_t tensor_count() const noexcept { return first_.size(); }
    std::uint64_t step() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return config_; }
    std::span<const double> first_moment(std::size_t i) const { return first_.at(i); }
    std::span<const double> second_moment(std::size_t i) const { return second_.at(i); }

    // p <- p - lr*wd*p, then the bias-corrected Adam update from grads.
    void apply(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads,
               double learning_rate,
               double weight_decay);

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
};

}  // namespace pnnl
