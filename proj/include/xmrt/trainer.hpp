#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmrt/augmentation.hpp"
#include "xmrt/core_math.hpp"
#include "xmrt/encoders.hpp"
#include "xmrt/losses.hpp"
#include "xmrt/optimizer.hpp"

namespace xmrt {

enum class Stage { pretrain, finetune, refinetune };

std::string to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct StageConfig {
    Stage stage = Stage::pretrain;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    bool augmentation = false;
    bool distill = false;
    bool cluster = false;

    // Distillation is never used in pretraining; cluster heads only in re-finetuning.
    void validate() const;
};

// Paired training data: row i of `audio` belongs with row i of `text`.
struct TrainingSet {
    DenseMatrix audio;
    DenseMatrix text;
    std::vector<std::vector<std::string>> captions;  // may be empty
    std::vector<bool> synthetic;                      // may be empty

    std::size_t size() const { return audio.rows(); }
    void validate() const;
};

// Per-pair cluster targets for the two classification heads.
struct PairLabels {
    std::vector<std::size_t> audio;
    std::vector<std::size_t> text;
    std::size_t clusters = 0;
};

struct TrainerOptions {
    LossConfig loss;
    AdamWConfig optimizer;
    double peak_lr = 2e-5;
    double floor_lr = 1e-7;
    double warmup_fraction = 0.1;
    AugmentationConfig augmentation;
    std::uint64_t seed = 0;
};

struct StageResult {
    ModelParams params;
    std::vector<LossBreakdown> step_log;
    std::vector<LossBreakdown> epoch_means;
    ScheduleConfig schedule;
};

// Seeded shuffle of [0, n_items), cut into full batches; the short tail is dropped.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n_items, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch);

// Appends `count` mixed pairs built from randomly chosen source pairs.
// Labels, when given, are extended with the first source's labels.
void append_mixed_pairs(TrainingSet& set, std::size_t count, std::uint64_t seed, PairLabels* labels);

StageResult run_stage(const StageConfig& stage, ModelParams params, const TrainingSet& data,
                      const TrainerOptions& options, std::span<const ModelParams> teachers = {},
                      const PairLabels* labels = nullptr);

LossBreakdown mean_breakdown(std::span<const LossBreakdown> entries);

}  // namespace xmrt
