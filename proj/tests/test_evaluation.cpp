#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "metric_oracle.hpp"
#include "support.hpp"
#include "xmrt/errors.hpp"
#include "xmrt/evaluation.hpp"

using namespace xmrt;

namespace {

using Ids = std::vector<std::size_t>;

// Similarity with ties: scores drawn from a small set of values.
DenseMatrix tied_matrix(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> level(0, 6);
    DenseMatrix m(n, n);
    for (double& v : m.values()) v = level(rng) / 6.0;
    return m;
}

void check_against_oracle(const DenseMatrix& sim, const RelevanceMap& rel) {
    for (AnnotationMode mode : {AnnotationMode::multiple, AnnotationMode::single}) {
        const MetricsReport got = evaluate(sim, rel, mode);
        const test::OracleMetrics want = test::oracle_metrics(sim, rel, mode == AnnotationMode::single);
        CHECK(std::abs(got.map_at_10 - want.map_at_10) < 1e-12);
        CHECK(std::abs(got.map_at_16 - want.map_at_16) < 1e-12);
        CHECK(std::abs(got.r_at_1 - want.r_at_1) < 1e-12);
        CHECK(std::abs(got.r_at_5 - want.r_at_5) < 1e-12);
        CHECK(std::abs(got.r_at_10 - want.r_at_10) < 1e-12);
        CHECK(got.map_at_10 <= got.map_at_16 + 1e-15);
        CHECK(got.r_at_1 <= got.r_at_5);
        CHECK(got.r_at_5 <= got.r_at_10);
    }
}

}  // namespace

TEST_CASE("rank_gallery examples") {
    const std::vector<double> scores{0.1, 0.9, 0.5};
    CHECK(rank_gallery(scores) == Ids{1, 2, 0});
    const std::vector<double> equal(5, 0.3);
    CHECK(rank_gallery(equal) == Ids{0, 1, 2, 3, 4});
    const std::vector<double> one{7.0};
    CHECK(rank_gallery(one) == Ids{0});
}

TEST_CASE("average precision examples") {
    CHECK(average_precision_at_k(Ids{4, 1, 2}, Ids{4}, 10) == 1.0);
    CHECK(average_precision_at_k(Ids{0, 1, 4, 2}, Ids{4}, 10) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(average_precision_at_k(Ids{4, 0, 7, 1}, Ids{4, 7}, 16) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(average_precision_at_k(Ids{0, 1}, Ids{}, 10), DataError);
}

TEST_CASE("average precision truncates and normalizes by min(|relevant|, k)") {
    Ids ranking(30);
    std::iota(ranking.begin(), ranking.end(), 0);
    // Relevant at ranks 1, 2 and 12: @10 sees two hits out of min(3,10) = 3.
    CHECK(average_precision_at_k(ranking, Ids{0, 1, 11}, 10) == doctest::Approx(2.0 / 3.0));
    CHECK(average_precision_at_k(ranking, Ids{0, 1, 11}, 16) == doctest::Approx((1 + 1 + 3.0 / 12.0) / 3.0));
    Ids many(12);
    std::iota(many.begin(), many.end(), 0);
    CHECK(average_precision_at_k(ranking, many, 10) == 1.0);
}

TEST_CASE("recall examples") {
    Ids ranking(10);
    std::iota(ranking.begin(), ranking.end(), 0);
    CHECK(recall_at_k(ranking, Ids{0}, 1) == 1.0);
    CHECK(recall_at_k(ranking, Ids{5}, 5) == 0.0);
    CHECK(recall_at_k(ranking, Ids{5}, 10) == 1.0);
    CHECK(recall_at_k(ranking, Ids{2, 8}, 5) == 0.5);
    CHECK_THROWS_AS(recall_at_k(ranking, Ids{}, 5), DataError);
}

TEST_CASE("evaluate examples") {
    const MetricsReport id = evaluate(DenseMatrix::identity(12), RelevanceMap::one_to_one(12), AnnotationMode::multiple);
    CHECK(id.map_at_10 == 1.0);
    CHECK(id.map_at_16 == 1.0);
    CHECK(id.r_at_1 == 1.0);
    CHECK(id.r_at_10 == 1.0);
    CHECK(id.query_count == 12);

    DenseMatrix reversed(20, 20, 1.0);
    for (std::size_t i = 0; i < 20; ++i) reversed(i, i) = 0.0;
    const MetricsReport rev = evaluate(reversed, RelevanceMap::one_to_one(20), AnnotationMode::single);
    CHECK(rev.map_at_16 == 0.0);
    CHECK(rev.r_at_10 == 0.0);

    CHECK_THROWS_AS(evaluate(DenseMatrix(3, 4, 0.0), RelevanceMap::one_to_one(3), AnnotationMode::single), ContractError);
}

TEST_CASE("single mode keeps only the paired item") {
    const DenseMatrix sim = DenseMatrix::from_rows({{0.1, 0.0}, {0.9, 0.0}, {0.0, 1.0}});
    RelevanceMap rel{{{0, 1}, {2}}, 3};
    // Query 0 ranks gallery as 1, 0, 2.
    CHECK(evaluate(sim, rel, AnnotationMode::multiple).map_at_10 == doctest::Approx((1.0 + 1.0) / 2.0));
    CHECK(evaluate(sim, rel, AnnotationMode::single).map_at_10 == doctest::Approx((0.5 + 1.0) / 2.0));
}

TEST_CASE("evaluate agrees with the direct-definition oracle") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + trial % 30;
        const RelevanceMap rel = test::random_relevance(n, 4, rng);
        check_against_oracle(test::random_matrix(n, n, rng), rel);
        check_against_oracle(tied_matrix(n, rng), rel);
    }
}

TEST_CASE("metrics are invariant under monotone transforms and consistent relabeling") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 25;
        const DenseMatrix sim = test::random_matrix(n, n, rng);
        const RelevanceMap rel = test::random_relevance(n, 3, rng);
        const MetricsReport base = evaluate(sim, rel, AnnotationMode::multiple);

        DenseMatrix warped = sim;
        for (double& v : warped.values()) v = std::exp(3.0 * v) - 7.0;
        const MetricsReport w = evaluate(warped, rel, AnnotationMode::multiple);
        CHECK(w.map_at_16 == base.map_at_16);
        CHECK(w.r_at_5 == base.r_at_5);

        // Renumber the gallery; ties cannot occur with continuous scores.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        DenseMatrix moved(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < n; ++q) moved(perm[i], q) = sim(i, q);
        RelevanceMap moved_rel = rel;
        for (auto& set : moved_rel.relevant)
            for (auto& id : set) id = perm[id];
        const MetricsReport m = evaluate(moved, moved_rel, AnnotationMode::multiple);
        CHECK(std::abs(m.map_at_10 - base.map_at_10) < 1e-15);
        CHECK(std::abs(m.map_at_16 - base.map_at_16) < 1e-15);
        CHECK(m.r_at_1 == base.r_at_1);
    }
}

TEST_CASE("relevance file round trip and validation") {
    const RelevanceMap rel{{{0, 3}, {1}, {2, 0, 1}}, 4};
    const RelevanceMap back = parse_relevance(format_relevance(rel), 4);
    CHECK(back.relevant == rel.relevant);
    CHECK(parse_relevance("# queries\n0 1\n\n2\n", 3).relevant == std::vector<Ids>{{0, 1}, {2}});
    CHECK_THROWS_AS(parse_relevance("0 7\n", 4), DataError);
    CHECK_THROWS_AS(parse_relevance("0 x\n", 4), DataError);
    CHECK_THROWS_AS((RelevanceMap{{{}}, 3}.validate()), DataError);
    CHECK(parse_annotation_mode("single") == AnnotationMode::single);
}
