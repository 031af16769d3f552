#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "support.hpp"
#include "xmrt/core_math.hpp"
#include "xmrt/errors.hpp"

using namespace xmrt;
using xmrt::test::random_matrix;

namespace {

// Softmax of one vector in long double, no max-subtraction.
std::vector<long double> softmax_oracle(const std::vector<double>& x, double tau) {
    std::vector<long double> e;
    long double z = 0;
    for (double v : x) {
        e.push_back(std::exp(static_cast<long double>(v) / tau));
        z += e.back();
    }
    for (auto& v : e) v /= z;
    return e;
}

ProbabilityMatrix random_distribution_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const DenseMatrix logits = random_matrix(rows, cols, rng, -3.0, 3.0);
    return softmax_with_temperature(logits, 1.0, Axis::over_captions);
}

}  // namespace

TEST_CASE("DenseMatrix rejects bad shapes and non-finite values") {
    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ContractError);
    CHECK_THROWS_AS(DenseMatrix(1, 2, std::vector<double>{1, NAN}), DomainError);
    CHECK_THROWS_AS(DenseMatrix(1, 1, std::vector<double>{INFINITY}), DomainError);
    const DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    CHECK(m.transposed()(2, 1) == 6);
    CHECK(DenseMatrix::identity(3)(1, 1) == 1);
}

TEST_CASE("cosine similarity examples") {
    CHECK(cosine_similarity_matrix(DenseMatrix::from_rows({{1, 0}}), DenseMatrix::from_rows({{1, 0}}))(0, 0) == 1.0);
    CHECK(cosine_similarity_matrix(DenseMatrix::from_rows({{1, 0}}), DenseMatrix::from_rows({{0, 1}}))(0, 0) == 0.0);
    CHECK(cosine_similarity_matrix(DenseMatrix::from_rows({{1, 0}}), DenseMatrix::from_rows({{1, 1}}))(0, 0) ==
          doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("cosine similarity names the zero-norm item") {
    Batch audio{DenseMatrix::from_rows({{1, 0}, {0, 0}}), {"dog", "silence"}};
    Batch text{DenseMatrix::from_rows({{1, 1}}), {"cap"}};
    try {
        cosine_similarity_matrix(audio, text);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("silence") != std::string::npos);
    }
    CHECK_THROWS_AS(cosine_similarity_matrix(DenseMatrix::from_rows({{1, 0}}), DenseMatrix::from_rows({{1, 0, 0}})),
                    ContractError);
}

TEST_CASE("cosine similarity matches a direct oracle and is scale invariant") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const DenseMatrix a = random_matrix(5, 4, rng);
        const DenseMatrix c = random_matrix(6, 4, rng);
        const DenseMatrix sim = cosine_similarity_matrix(a, c);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 6; ++j) {
                long double dot = 0, na = 0, nc = 0;
                for (std::size_t k = 0; k < 4; ++k) {
                    dot += static_cast<long double>(a(i, k)) * c(j, k);
                    na += static_cast<long double>(a(i, k)) * a(i, k);
                    nc += static_cast<long double>(c(j, k)) * c(j, k);
                }
                const double expected = static_cast<double>(dot / std::sqrt(na * nc));
                CHECK(std::abs(sim(i, j) - expected) < 1e-12);
                CHECK(sim(i, j) <= 1.0);
                CHECK(sim(i, j) >= -1.0);
            }

        DenseMatrix scaled = a;
        std::uniform_real_distribution<double> s(0.01, 100.0);
        for (std::size_t i = 0; i < scaled.rows(); ++i) {
            const double f = s(rng);
            for (double& v : scaled.row(i)) v *= f;
        }
        CHECK(test::max_abs_diff(cosine_similarity_matrix(scaled, c), sim) < 1e-6);
    }
}

TEST_CASE("softmax examples") {
    const auto half = softmax_with_temperature(DenseMatrix::from_rows({{0, 0}}), 0.05, Axis::over_captions);
    CHECK(half.probs(0, 0) == 0.5);
    CHECK(half.probs(0, 1) == 0.5);

    const auto p1 = softmax_with_temperature(DenseMatrix::from_rows({{1, 0}}), 1.0, Axis::over_captions);
    CHECK(p1.probs(0, 0) == doctest::Approx(0.73105858).epsilon(1e-8));
    CHECK(p1.probs(0, 1) == doctest::Approx(0.26894142).epsilon(1e-8));

    const auto sharp = softmax_with_temperature(DenseMatrix::from_rows({{1, 0}}), 0.05, Axis::over_captions);
    const auto oracle = softmax_oracle({1, 0}, 0.05);
    CHECK(std::abs(sharp.probs(0, 1) - static_cast<double>(oracle[1])) < 1e-20);
    CHECK(sharp.probs(0, 1) == doctest::Approx(2.06e-9).epsilon(0.01));
    CHECK(std::abs(sharp.probs(0, 0) - (1.0 - 2.061153622e-9)) < 1e-15);
}

TEST_CASE("softmax rejects non-positive temperature") {
    const DenseMatrix x = DenseMatrix::from_rows({{1, 2}});
    CHECK_THROWS_AS(softmax_with_temperature(x, 0.0, Axis::over_captions), ConfigError);
    CHECK_THROWS_AS(softmax_with_temperature(x, -1.0, Axis::over_audios), ConfigError);
    CHECK_THROWS_AS(log_softmax_with_temperature(x, 0.0, Axis::over_audios), ConfigError);
}

TEST_CASE("softmax property: normalized, shift invariant, matches oracle along either axis") {
    std::mt19937_64 rng(5);
    for (double tau : {0.05, 1.0, 10.0}) {
        for (int trial = 0; trial < 40; ++trial) {
            const DenseMatrix x = random_matrix(4, 7, rng, -2.0, 2.0);
            const auto rows = softmax_with_temperature(x, tau, Axis::over_captions);
            const auto cols = softmax_with_temperature(x, tau, Axis::over_audios);
            for (std::size_t i = 0; i < 4; ++i) {
                double sum = 0;
                for (double v : rows.probs.row(i)) sum += v;
                CHECK(std::abs(sum - 1.0) < 1e-6);
            }
            for (std::size_t j = 0; j < 7; ++j) {
                double sum = 0;
                std::vector<double> column;
                for (std::size_t i = 0; i < 4; ++i) {
                    sum += cols.probs(i, j);
                    column.push_back(x(i, j));
                }
                CHECK(std::abs(sum - 1.0) < 1e-6);
                const auto oracle = softmax_oracle(column, tau);
                for (std::size_t i = 0; i < 4; ++i)
                    CHECK(std::abs(cols.probs(i, j) - static_cast<double>(oracle[i])) < 1e-12);
            }

            DenseMatrix shifted = x;
            const double shift = std::uniform_real_distribution<double>(-50, 50)(rng);
            for (double& v : shifted.row(2)) v += shift;
            const auto after = softmax_with_temperature(shifted, tau, Axis::over_captions);
            for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(after.probs(2, j) - rows.probs(2, j)) < 1e-6);
        }
    }
}

TEST_CASE("log softmax agrees with the log of softmax") {
    std::mt19937_64 rng(8);
    const DenseMatrix x = random_matrix(5, 5, rng);
    for (Axis axis : {Axis::over_audios, Axis::over_captions}) {
        const auto p = softmax_with_temperature(x, 0.3, axis);
        const DenseMatrix lp = log_softmax_with_temperature(x, 0.3, axis);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(lp.values()[i] - std::log(p.probs.values()[i])) < 1e-12);
    }
}

TEST_CASE("cross entropy examples") {
    ProbabilityMatrix onehot{DenseMatrix::from_rows({{0, 1, 0, 0}}), Axis::over_captions};
    ProbabilityMatrix uniform4{DenseMatrix::from_rows({{0.25, 0.25, 0.25, 0.25}}), Axis::over_captions};
    ProbabilityMatrix uniform2{DenseMatrix::from_rows({{0.5, 0.5}}), Axis::over_captions};
    CHECK(cross_entropy(onehot, onehot) == 0.0);
    CHECK(cross_entropy(onehot, uniform4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(cross_entropy(uniform2, uniform2) == doctest::Approx(0.69314718).epsilon(1e-8));
}

TEST_CASE("cross entropy averages over distributions and clamps zeros") {
    ProbabilityMatrix p{DenseMatrix::from_rows({{1, 0}, {0, 1}}), Axis::over_captions};
    ProbabilityMatrix q{DenseMatrix::from_rows({{0.5, 0.5}, {1, 0}}), Axis::over_captions};
    // Second row hits q = 0 and is clamped to -log(1e-12).
    const double expected = (std::log(2.0) - std::log(kLogClamp)) / 2.0;
    CHECK(cross_entropy(p, q) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("cross entropy contract errors") {
    ProbabilityMatrix a{DenseMatrix::from_rows({{0.5, 0.5}}), Axis::over_captions};
    ProbabilityMatrix b{DenseMatrix::from_rows({{0.5, 0.5}}), Axis::over_audios};
    ProbabilityMatrix c{DenseMatrix::from_rows({{0.2, 0.3, 0.5}}), Axis::over_captions};
    CHECK_THROWS_AS(cross_entropy(a, b), ContractError);
    CHECK_THROWS_AS(cross_entropy(a, c), ContractError);
}

TEST_CASE("Gibbs inequality on random distributions") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_distribution_rows(3, 6, rng);
        const auto q = random_distribution_rows(3, 6, rng);
        CHECK(cross_entropy(p, q) >= cross_entropy(p, p) - 1e-12);
        CHECK(std::abs(cross_entropy(p, p) - entropy(p)) < 1e-12);
    }
}
