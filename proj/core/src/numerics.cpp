#include "pnnl/numerics.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pnnl {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("gather_rows: row index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

Matrix Matrix::column_block(std::size_t first, std::size_t count) const {
    if (first + count > cols_) throw DimensionError("column_block out of range");
    Matrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, first + c);
    return out;
}

void Matrix::set_column_block(std::size_t first, const Matrix& block) {
    if (block.rows_ != rows_ || first + block.cols_ > cols_)
        throw DimensionError("set_column_block: " + shape(block) + " into " + shape(*this));
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < block.cols_; ++c) (*this)(r, first + c) = block(r, c);
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
    Matrix c(a.rows(), b.cols());
    // i-k-j order: each c(i,j) still accumulates k = 0, 1, ... in sequence.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        const auto lhs = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = lhs[k];
            const auto rhs = b.row(k);
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += aik * rhs[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: " + shape(a) + "^T * " + shape(b));
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto lhs = a.row(k);
        const auto rhs = b.row(k);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double aki = lhs[i];
            auto out = c.row(i);
            for (std::size_t j = 0; j < rhs.size(); ++j) out[j] += aki * rhs[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto lhs = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto rhs = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < lhs.size(); ++k) acc += lhs[k] * rhs[k];
            c(i, j) = acc;
        }
    }
    return c;
}

void add_row_vector(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) throw DimensionError("add_row_vector: width mismatch");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) sums[c] += row[c];
    }
    return sums;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto in = logits.row(r);
        auto out = probs.row(r);
        if (in.empty()) continue;
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = std::exp(in[c] - mx);
            total += out[c];
        }
        for (double& v : out) v /= total;
    }
    return probs;
}

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels) {
    if (labels.size() != logits.rows())
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(logits.rows()) + " rows");
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    CrossEntropy out;
    out.grad_logits = Matrix(n, k);
    out.per_sample.resize(n);
    const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto z = logits.row(r);
        const std::uint32_t y = labels[r];
        if (y >= k) throw DimensionError("softmax_cross_entropy: label out of range");
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - mx);
        const double log_sum = std::log(sum);
        const double sample_loss = std::max(0.0, log_sum - (z[y] - mx));
        out.per_sample[r] = sample_loss;
        total += sample_loss;
        auto g = out.grad_logits.row(r);
        for (std::size_t c = 0; c < k; ++c) g[c] = std::exp(z[c] - mx - log_sum) * inv_n;
        g[y] -= inv_n;
    }
    out.loss = total * inv_n;
    return out;
}

// ---------------------------------------------------------------------------
// splitmix64
// ---------------------------------------------------------------------------
namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() noexcept {
    state_ += kGolden;
    return splitmix64_mix(state_);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) noexcept {
    const auto j = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return std::min(j, n - 1);
}

Rng Rng::derive(std::span<const std::uint64_t> tags) const noexcept {
    std::uint64_t s = state_;
    for (std::uint64_t tag : tags) s = splitmix64_mix(s ^ splitmix64_mix(tag + kGolden));
    return Rng(s);
}

Rng Rng::derive(std::initializer_list<std::uint64_t> tags) const noexcept {
    return derive(std::span<const std::uint64_t>(tags.begin(), tags.size()));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------
AdamState::AdamState(std::span<const std::size_t> sizes, AdamConfig config) : config_(config) {
    first_.reserve(sizes.size());
    second_.reserve(sizes.size());
    for (std::size_t s : sizes) {
        first_.emplace_back(s, 0.0);
        second_.emplace_back(s, 0.0);
    }
}

void AdamState::apply(std::span<const std::span<double>> params,
                      std::span<const std::span<const double>> grads,
                      double learning_rate,
                      double weight_decay) {
    if (params.size() != first_.size() || grads.size() != first_.size())
        throw DimensionError("adam: tensor count mismatch");
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size() != first_[t].size() || grads[t].size() != first_[t].size())
            throw DimensionError("adam: shape mismatch for tensor " + std::to_string(t));
    }
    ++step_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t];
        const auto g = grads[t];
        auto& m = first_[t];
        auto& v = second_[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (weight_decay != 0.0) p[i] -= learning_rate * weight_decay * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace pnnl
