#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace xmrt {

// Row-major dense matrix of doubles. Houses embeddings, similarity
// matrices, logits and probability tables.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    // Throws ContractError if values.size() != rows*cols or DomainError on
    // non-finite entries.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    DenseMatrix transposed() const;
    bool all_finite() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// A batch of feature vectors or encoder outputs, one row per item. Ids are
// optional; when absent, error messages fall back to row indices.
struct Batch {
    DenseMatrix values;
    std::vector<std::string> ids;

    std::string item_name(std::size_t row) const;
};

using FeatureBatch = Batch;
using EmbeddingBatch = Batch;

// over_audios: each column (fixed caption) is a distribution over audio rows.
// over_captions: each row (fixed audio) is a distribution over caption columns.
enum class Axis { over_audios, over_captions };

struct ProbabilityMatrix {
    DenseMatrix probs;
    Axis axis = Axis::over_captions;

    std::size_t distribution_count() const;
};

// C_ij = <a_i, c_j> / (|a_i| |c_j|); rows are audio items, columns captions.
DenseMatrix cosine_similarity_matrix(const EmbeddingBatch& audio, const EmbeddingBatch& text);
DenseMatrix cosine_similarity_matrix(const DenseMatrix& audio, const DenseMatrix& text);

ProbabilityMatrix softmax_with_temperature(const DenseMatrix& logits, double tau, Axis axis);

// Log of the temperature softmax, computed as x/tau - logsumexp(x/tau).
DenseMatrix log_softmax_with_temperature(const DenseMatrix& logits, double tau, Axis axis);

inline constexpr double kLogClamp = 1e-12;

// Mean over distributions of -sum p log(max(q, 1e-12)), natural log.
double cross_entropy(const ProbabilityMatrix& targets, const ProbabilityMatrix& predictions);

// Mean over distributions of -sum p log p, with 0 log 0 = 0.
double entropy(const ProbabilityMatrix& p);

}  // namespace xmrt
