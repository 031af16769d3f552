#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/encoders.hpp"

namespace xmrt {

struct LossConfig {
    double tau = 0.05;
    double lambda1 = 1.0;  // distillation weight
    double lambda2 = 0.05;  // cluster-classification weight

    void validate() const;
};

struct LossBreakdown {
    double l_sup = 0.0;
    double l_dist = 0.0;
    double l_cls_audio = 0.0;
    double l_cls_text = 0.0;
    double total = 0.0;
};

// Soft correspondence targets from an averaged teacher similarity matrix.
// `audio` distributes over audios (columns sum to one), `text` over captions.
struct TeacherTargets {
    ProbabilityMatrix audio;
    ProbabilityMatrix text;
    std::size_t teacher_count = 1;
};

// Positives sit on the diagonal: audio i pairs with caption i.
double supervised_contrastive_loss(const DenseMatrix& sim, const LossConfig& cfg);

DenseMatrix ensemble_average(std::span<const DenseMatrix> similarities);

TeacherTargets teacher_soft_targets(const DenseMatrix& avg_sim, const LossConfig& cfg,
                                    std::size_t teacher_count = 1);

double distillation_loss(const TeacherTargets& targets, const DenseMatrix& sim, const LossConfig& cfg);

// Summed entropy of both target directions; the floor of distillation_loss.
double target_entropy(const TeacherTargets& targets);

double classification_loss(const DenseMatrix& logits, std::span<const std::size_t> labels);

LossBreakdown combined_loss(double l_sup, double l_dist, double l_cls_audio, double l_cls_text,
                            const LossConfig& cfg);

// One contrastive batch: row i of `audio` pairs with row i of `text`.
struct TrainingBatch {
    DenseMatrix audio;
    DenseMatrix text;
    std::optional<std::vector<std::size_t>> audio_labels;
    std::optional<std::vector<std::size_t>> text_labels;

    std::size_t size() const { return audio.rows(); }
};

// Similarity matrix of a model on a batch (frozen forward pass).
DenseMatrix batch_similarity(const ModelParams& params, const DenseMatrix& audio, const DenseMatrix& text);

// Averages the teachers' similarities on the batch and turns them into soft targets.
TeacherTargets teacher_targets_for_batch(std::span<const ModelParams> teachers, const TrainingBatch& batch,
                                         const LossConfig& cfg);

struct HeadLossResult {
    double loss = 0.0;
    ClassificationHead gradients;
    DenseMatrix embedding_gradients;
};

// Mean cross-entropy of the head's logits against labels, with exact
// gradients for the head and its input embeddings.
HeadLossResult head_loss_and_gradients(const ClassificationHead& head, const DenseMatrix& embeddings,
                                       std::span<const std::size_t> labels);

struct LossAndGradients {
    LossBreakdown breakdown;
    ParamGradients gradients;
};

// Full objective L_sup + lambda1 L_dist + lambda2 (L_cls_a + L_cls_c) with its
// analytic gradient. `targets` must be given when lambda1 > 0 and labels
// when lambda2 > 0. Teacher targets are constants.
LossAndGradients loss_and_gradients(const ModelParams& params, const TrainingBatch& batch,
                                    const TeacherTargets* targets, const LossConfig& cfg);

}  // namespace xmrt
