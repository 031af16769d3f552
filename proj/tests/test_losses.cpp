#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "support.hpp"
#include "xmrt/errors.hpp"
#include "xmrt/losses.hpp"

using namespace xmrt;

namespace {

const LossConfig kDefaults{};

// Direct-from-definition contrastive loss: mean CE over columns (audio
// distributions) plus mean CE over rows (caption distributions).
double contrastive_oracle(const DenseMatrix& sim, double tau) {
    const std::size_t n = sim.rows();
    long double rows = 0, cols = 0;
    for (std::size_t i = 0; i < n; ++i) {
        long double zr = 0, zc = 0;
        for (std::size_t k = 0; k < n; ++k) {
            zr += std::exp(static_cast<long double>(sim(i, k)) / tau);
            zc += std::exp(static_cast<long double>(sim(k, i)) / tau);
        }
        rows += -(sim(i, i) / tau - std::log(zr));
        cols += -(sim(i, i) / tau - std::log(zc));
    }
    return static_cast<double>((rows + cols) / n);
}

DenseMatrix constant(std::size_t n, double v) { return DenseMatrix(n, n, v); }

}  // namespace

TEST_CASE("LossConfig defaults and validation") {
    CHECK(kDefaults.tau == 0.05);
    CHECK(kDefaults.lambda1 == 1.0);
    CHECK(kDefaults.lambda2 == 0.05);
    CHECK_THROWS_AS((LossConfig{0.0, 1.0, 0.05}.validate()), ConfigError);
    CHECK_THROWS_AS((LossConfig{0.05, -1.0, 0.05}.validate()), ConfigError);
    CHECK_THROWS_AS((LossConfig{0.05, 1.0, -0.1}.validate()), ConfigError);
}

TEST_CASE("supervised contrastive loss examples") {
    CHECK(supervised_contrastive_loss(DenseMatrix::identity(2), kDefaults) <= 1e-8);
    CHECK(supervised_contrastive_loss(DenseMatrix::identity(2), kDefaults) ==
          doctest::Approx(2.0 * std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(std::abs(supervised_contrastive_loss(constant(4, 0.3), kDefaults) - 2.0 * std::log(4.0)) < 1e-9);
    CHECK(std::abs(supervised_contrastive_loss(DenseMatrix::from_rows({{0, 1}, {1, 0}}), kDefaults) - 40.0) < 1e-6);
    CHECK_THROWS_AS(supervised_contrastive_loss(DenseMatrix(2, 3, 0.0), kDefaults), ContractError);
}

TEST_CASE("supervised contrastive loss matches the oracle on random matrices") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const DenseMatrix sim = test::random_matrix(6, 6, rng);
        CHECK(std::abs(supervised_contrastive_loss(sim, kDefaults) - contrastive_oracle(sim, 0.05)) < 1e-9);
    }
}

TEST_CASE("raising a diagonal entry never increases the supervised loss") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        DenseMatrix sim = test::random_matrix(5, 5, rng);
        const double before = supervised_contrastive_loss(sim, kDefaults);
        const std::size_t i = trial % 5;
        sim(i, i) += std::uniform_real_distribution<double>(1e-4, 0.5)(rng);
        CHECK(supervised_contrastive_loss(sim, kDefaults) <= before + 1e-12);
    }
}

TEST_CASE("ensemble average examples") {
    std::mt19937_64 rng(4);
    const DenseMatrix a = test::random_matrix(3, 3, rng);
    const DenseMatrix single = ensemble_average(std::span<const DenseMatrix>(&a, 1));
    CHECK(test::bit_equal(single, a));

    std::vector<DenseMatrix> three{constant(2, 0.3), constant(2, 0.6), constant(2, 0.9)};
    CHECK(ensemble_average(three)(1, 0) == doctest::Approx(0.6).epsilon(1e-15));

    std::vector<DenseMatrix> same{a, a, a};
    CHECK(test::max_abs_diff(ensemble_average(same), a) < 1e-15);

    CHECK_THROWS_AS(ensemble_average({}), ContractError);
    std::vector<DenseMatrix> ragged{constant(2, 0), constant(3, 0)};
    CHECK_THROWS_AS(ensemble_average(ragged), ContractError);
}

TEST_CASE("ensemble average is exactly invariant to teacher order") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<DenseMatrix> sims;
        for (int t = 0; t < 2 + trial % 5; ++t) sims.push_back(test::random_matrix(4, 5, rng, -1e3, 1e3));
        const DenseMatrix base = ensemble_average(sims);
        std::vector<std::size_t> order(sims.size());
        std::iota(order.begin(), order.end(), 0);
        for (int p = 0; p < 5; ++p) {
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<DenseMatrix> permuted;
            for (std::size_t i : order) permuted.push_back(sims[i]);
            CHECK(test::bit_equal(ensemble_average(permuted), base));
        }
    }
}

TEST_CASE("teacher soft targets examples") {
    const TeacherTargets id = teacher_soft_targets(DenseMatrix::identity(2), kDefaults);
    CHECK(id.audio.axis == Axis::over_audios);
    CHECK(id.text.axis == Axis::over_captions);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            CHECK(std::abs(id.audio.probs(i, j) - expected) < 1e-8);
            CHECK(std::abs(id.text.probs(i, j) - expected) < 1e-8);
        }

    const TeacherTargets flat = teacher_soft_targets(constant(3, 0.4), kDefaults);
    for (double p : flat.audio.probs.values()) CHECK(p == doctest::Approx(1.0 / 3.0));
    for (double p : flat.text.probs.values()) CHECK(p == doctest::Approx(1.0 / 3.0));

    const TeacherTargets warm = teacher_soft_targets(DenseMatrix::from_rows({{1, 0}, {0, 0}}), {1.0, 1.0, 0.05});
    CHECK(warm.text.probs(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(warm.text.probs(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("distillation loss examples") {
    std::mt19937_64 rng(6);
    const DenseMatrix teacher = test::random_matrix(5, 5, rng);
    const TeacherTargets t = teacher_soft_targets(teacher, kDefaults);
    CHECK(std::abs(distillation_loss(t, teacher, kDefaults) - target_entropy(t)) < 1e-6);

    const TeacherTargets uniform = teacher_soft_targets(constant(2, 0.0), kDefaults);
    CHECK(std::abs(distillation_loss(uniform, constant(2, 0.7), kDefaults) - 2.0 * std::log(2.0)) < 1e-12);

    const TeacherTargets onehot{{DenseMatrix::identity(2), Axis::over_audios}, {DenseMatrix::identity(2), Axis::over_captions}, 1};
    CHECK(distillation_loss(onehot, DenseMatrix::identity(2), kDefaults) <= 1e-8);

    CHECK_THROWS_AS(distillation_loss(t, constant(4, 0.0), kDefaults), ContractError);
}

TEST_CASE("distillation loss is bounded below by the target entropy") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const TeacherTargets t = teacher_soft_targets(test::random_matrix(4, 4, rng), kDefaults);
        const double student = distillation_loss(t, test::random_matrix(4, 4, rng), kDefaults);
        CHECK(student >= target_entropy(t) - 1e-9);
    }
}

TEST_CASE("classification loss examples") {
    const std::vector<std::size_t> one{1};
    CHECK(std::abs(classification_loss(DenseMatrix::from_rows({{2, 2, 2}}), one) - std::log(3.0)) < 1e-12);
    CHECK(classification_loss(DenseMatrix::from_rows({{0, 40, 0}}), one) <= 1e-8);
    const std::vector<std::size_t> two{0, 0};
    const double mixed = classification_loss(DenseMatrix::from_rows({{0, 0}, {60, 0}}), two);
    CHECK(std::abs(mixed - std::log(2.0) / 2.0) < 1e-12);
    const std::vector<std::size_t> bad{3};
    CHECK_THROWS_AS(classification_loss(DenseMatrix::from_rows({{0, 0, 0}}), bad), DataError);
}

TEST_CASE("combined loss examples") {
    const LossBreakdown b = combined_loss(1.0, 0.5, 0.2, 0.4, kDefaults);
    CHECK(std::abs(b.total - 1.53) < 1e-12);
    CHECK(b.l_dist == 0.5);
    CHECK(b.l_cls_text == 0.4);
    const LossBreakdown eq9 = combined_loss(1.0, 0.5, 0.2, 0.4, {0.05, 1.0, 0.0});
    CHECK(eq9.total == 1.5);
    CHECK(combined_loss(0, 0, 0, 0, kDefaults).total == 0.0);
    CHECK_THROWS_AS(combined_loss(-1e-3, 0, 0, 0, kDefaults), ContractError);
}

TEST_CASE("loss_and_gradients reports the recombined total") {
    const test::GradCheckCase c = test::random_gradcheck_case(3);
    const LossAndGradients r = loss_and_gradients(c.params, c.batch, &c.targets, kDefaults);
    const LossBreakdown& b = r.breakdown;
    CHECK(std::abs(b.total - (b.l_sup + kDefaults.lambda1 * b.l_dist + kDefaults.lambda2 * (b.l_cls_audio + b.l_cls_text))) <
          1e-9);
    CHECK(std::abs(b.l_sup - supervised_contrastive_loss(batch_similarity(c.params, c.batch.audio, c.batch.text),
                                                         kDefaults)) < 1e-12);
}

TEST_CASE("gradient check across loss-path combinations") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const test::GradCheckCase c = test::random_gradcheck_case(seed);
        SUBCASE("supervised only") {
            TrainingBatch plain = c.batch;
            plain.audio_labels.reset();
            plain.text_labels.reset();
            ModelParams p = c.params;
            p.audio_head.reset();
            p.text_head.reset();
            CHECK(test::gradient_check(p, plain, nullptr, {0.05, 0.0, 0.0}).max_relative_error < 1e-4);
        }
        SUBCASE("supervised and distillation") {
            TrainingBatch plain = c.batch;
            plain.audio_labels.reset();
            plain.text_labels.reset();
            CHECK(test::gradient_check(c.params, plain, &c.targets, {0.05, 1.0, 0.0}).max_relative_error < 1e-4);
        }
        SUBCASE("all paths") {
            CHECK(test::gradient_check(c.params, c.batch, &c.targets, kDefaults).max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("zero lambdas give the supervised-only gradient") {
    const test::GradCheckCase c = test::random_gradcheck_case(9);
    const LossAndGradients full = loss_and_gradients(c.params, c.batch, &c.targets, {0.05, 0.0, 0.0});
    TrainingBatch plain = c.batch;
    plain.audio_labels.reset();
    plain.text_labels.reset();
    ModelParams p = c.params;
    p.audio_head.reset();
    p.text_head.reset();
    const LossAndGradients sup = loss_and_gradients(p, plain, nullptr, {0.05, 0.0, 0.0});
    const auto a = tensors(full.gradients.values);
    const auto b = tensors(sup.gradients.values);
    for (std::size_t t = 0; t < b.size(); ++t)
        for (std::size_t k = 0; k < b[t].data.size(); ++k) CHECK(a[t].data[k] == b[t].data[k]);
}

TEST_CASE("classification gradients are unchanged by duplicating the batch") {
    std::mt19937_64 rng(12);
    const ClassificationHead head = init_head(4, 3, 5);
    const DenseMatrix emb = test::gaussian_matrix(4, 4, rng);
    const std::vector<std::size_t> labels{0, 2, 1, 2};
    DenseMatrix doubled(8, 4);
    std::vector<std::size_t> doubled_labels;
    for (std::size_t r = 0; r < 8; ++r) {
        std::copy(emb.row(r % 4).begin(), emb.row(r % 4).end(), doubled.row(r).begin());
        doubled_labels.push_back(labels[r % 4]);
    }
    const HeadLossResult once = head_loss_and_gradients(head, emb, labels);
    const HeadLossResult twice = head_loss_and_gradients(head, doubled, doubled_labels);
    CHECK(std::abs(once.loss - twice.loss) < 1e-12);
    CHECK(test::max_abs_diff(once.gradients.w1, twice.gradients.w1) < 1e-12);
    CHECK(test::max_abs_diff(once.gradients.w2, twice.gradients.w2) < 1e-12);
    for (std::size_t h = 0; h < once.gradients.b1.size(); ++h)
        CHECK(std::abs(once.gradients.b1[h] - twice.gradients.b1[h]) < 1e-12);
}

TEST_CASE("loss_and_gradients config errors") {
    const test::GradCheckCase c = test::random_gradcheck_case(1);
    CHECK_THROWS_AS(loss_and_gradients(c.params, c.batch, nullptr, kDefaults), ConfigError);
    TrainingBatch unlabeled = c.batch;
    unlabeled.audio_labels.reset();
    unlabeled.text_labels.reset();
    CHECK_THROWS_AS(loss_and_gradients(c.params, unlabeled, &c.targets, kDefaults), ConfigError);
    ModelParams headless = c.params;
    headless.audio_head.reset();
    headless.text_head.reset();
    CHECK_THROWS_AS(loss_and_gradients(headless, c.batch, &c.targets, kDefaults), ConfigError);
}
