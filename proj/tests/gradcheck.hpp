#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "xmrt/losses.hpp"

namespace xmrt::test {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

// Compares loss_and_gradients against central differences of breakdown.total
// for every scalar parameter.
inline GradCheckResult gradient_check(ModelParams params, const TrainingBatch& batch, const TeacherTargets* targets,
                                      const LossConfig& cfg, double h = 1e-5) {
    const LossAndGradients analytic = loss_and_gradients(params, batch, targets, cfg);
    const auto grads = tensors(analytic.gradients.values);
    auto views = tensors(params);
    GradCheckResult result;
    for (std::size_t t = 0; t < views.size(); ++t) {
        for (std::size_t k = 0; k < views[t].data.size(); ++k) {
            double& theta = views[t].data[k];
            const double saved = theta;
            theta = saved + h;
            const double up = loss_and_gradients(params, batch, targets, cfg).breakdown.total;
            theta = saved - h;
            const double down = loss_and_gradients(params, batch, targets, cfg).breakdown.total;
            theta = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double exact = grads[t].data[k];
            const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-6});
            result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - exact) / scale);
            ++result.checked;
        }
    }
    return result;
}

// Random 4-item batch with labels, a model with heads and teacher targets
// from an independently initialized model.
struct GradCheckCase {
    ModelParams params;
    TrainingBatch batch;
    TeacherTargets targets;
};

inline GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t n = 4, std::size_t d_audio = 6,
                                           std::size_t d_text = 5, std::size_t d_emb = 4, std::size_t clusters = 3) {
    std::mt19937_64 rng(seed);
    GradCheckCase c;
    c.params = init_params(d_audio, d_text, d_emb, clusters, seed);
    // Nonzero biases so their gradients are exercised away from the origin.
    for (auto& view : tensors(c.params))
        if (view.dims.size() == 1)
            for (double& v : view.data) v = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    c.batch.audio = gaussian_matrix(n, d_audio, rng);
    c.batch.text = gaussian_matrix(n, d_text, rng);
    std::uniform_int_distribution<std::size_t> label(0, clusters - 1);
    c.batch.audio_labels.emplace();
    c.batch.text_labels.emplace();
    for (std::size_t i = 0; i < n; ++i) {
        c.batch.audio_labels->push_back(label(rng));
        c.batch.text_labels->push_back(label(rng));
    }
    const ModelParams teacher = init_params(d_audio, d_text, d_emb, std::nullopt, seed + 1000);
    c.targets = teacher_targets_for_batch(std::span<const ModelParams>(&teacher, 1), c.batch, LossConfig{});
    return c;
}

}  // namespace xmrt::test
