#include "xmrt/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xmrt/errors.hpp"

namespace xmrt {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw ContractError("matrix of " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                            " given " + std::to_string(values_.size()) + " values");
    }
    if (!all_finite()) throw DomainError("matrix contains non-finite entries");
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ContractError("ragged row list");
        values.insert(values.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(values));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Batch::item_name(std::size_t row) const {
    if (row < ids.size()) return "'" + ids[row] + "'";
    return "#" + std::to_string(row);
}

std::size_t ProbabilityMatrix::distribution_count() const {
    return axis == Axis::over_captions ? probs.rows() : probs.cols();
}

namespace {

std::vector<double> row_norms(const Batch& batch) {
    const auto& m = batch.values;
    std::vector<double> norms(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double sq = 0.0;
        for (double v : m.row(r)) sq += v * v;
        norms[r] = std::sqrt(sq);
        if (!(norms[r] > 0.0)) {
            throw DomainError("zero-norm embedding for item " + batch.item_name(r));
        }
    }
    return norms;
}

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError("temperature must be positive, got " + std::to_string(tau));
    }
}

}  // namespace

DenseMatrix cosine_similarity_matrix(const EmbeddingBatch& audio, const EmbeddingBatch& text) {
    const auto& a = audio.values;
    const auto& c = text.values;
    if (a.cols() != c.cols()) {
        throw ContractError("embedding widths differ: audio " + std::to_string(a.cols()) + ", text " +
                            std::to_string(c.cols()));
    }
    const auto na = row_norms(audio);
    const auto nc = row_norms(text);
    DenseMatrix sim(a.rows(), c.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < c.rows(); ++j) {
            const auto cj = c.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < ai.size(); ++k) dot += ai[k] * cj[k];
            sim(i, j) = std::clamp(dot / (na[i] * nc[j]), -1.0, 1.0);
        }
    }
    return sim;
}

DenseMatrix cosine_similarity_matrix(const DenseMatrix& audio, const DenseMatrix& text) {
    return cosine_similarity_matrix(Batch{audio, {}}, Batch{text, {}});
}

DenseMatrix log_softmax_with_temperature(const DenseMatrix& logits, double tau, Axis axis) {
    check_tau(tau);
    DenseMatrix out(logits.rows(), logits.cols());
    const bool by_row = axis == Axis::over_captions;
    const std::size_t groups = by_row ? logits.rows() : logits.cols();
    const std::size_t len = by_row ? logits.cols() : logits.rows();
    auto at = [&](const DenseMatrix& m, std::size_t g, std::size_t k) {
        return by_row ? m(g, k) : m(k, g);
    };
    for (std::size_t g = 0; g < groups; ++g) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < len; ++k) peak = std::max(peak, at(logits, g, k) / tau);
        double sum = 0.0;
        for (std::size_t k = 0; k < len; ++k) sum += std::exp(at(logits, g, k) / tau - peak);
        const double lse = peak + std::log(sum);
        for (std::size_t k = 0; k < len; ++k) {
            const double v = at(logits, g, k) / tau - lse;
            if (by_row) out(g, k) = v; else out(k, g) = v;
        }
    }
    return out;
}

ProbabilityMatrix softmax_with_temperature(const DenseMatrix& logits, double tau, Axis axis) {
    DenseMatrix p = log_softmax_with_temperature(logits, tau, axis);
    for (double& v : p.values()) v = std::exp(v);
    return {std::move(p), axis};
}

double cross_entropy(const ProbabilityMatrix& targets, const ProbabilityMatrix& predictions) {
    if (targets.axis != predictions.axis) throw ContractError("cross_entropy: axis mismatch");
    if (targets.probs.rows() != predictions.probs.rows() ||
        targets.probs.cols() != predictions.probs.cols()) {
        throw ContractError("cross_entropy: shape mismatch");
    }
    const std::size_t n = targets.distribution_count();
    if (n == 0) return 0.0;
    const auto p = targets.probs.values();
    const auto q = predictions.probs.values();
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] != 0.0) total -= p[k] * std::log(std::max(q[k], kLogClamp));
    }
    return total / static_cast<double>(n);
}

double entropy(const ProbabilityMatrix& p) {
    const std::size_t n = p.distribution_count();
    if (n == 0) return 0.0;
    double total = 0.0;
    for (double v : p.probs.values()) {
        if (v > 0.0) total -= v * std::log(v);
    }
    return total / static_cast<double>(n);
}

}  // namespace xmrt
