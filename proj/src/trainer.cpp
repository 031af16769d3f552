#include "xmrt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "xmrt/errors.hpp"

namespace xmrt {

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::pretrain: return "pretrain";
        case Stage::finetune: return "finetune";
        case Stage::refinetune: return "refinetune";
    }
    return "unknown";
}

Stage parse_stage(std::string_view name) {
    if (name == "pretrain") return Stage::pretrain;
    if (name == "finetune") return Stage::finetune;
    if (name == "refinetune") return Stage::refinetune;
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

void StageConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2 so every batch has negatives");
    if (stage == Stage::pretrain && distill) throw ConfigError("distillation is not used in pretraining");
    if (cluster && stage != Stage::refinetune) {
        throw ConfigError("cluster classification is only enabled in re-finetuning");
    }
}

void TrainingSet::validate() const {
    if (text.rows() != audio.rows()) throw ContractError("training set audio/text row counts differ");
    if (!captions.empty() && captions.size() != audio.rows()) {
        throw ContractError("training set caption count differs from pair count");
    }
    if (!synthetic.empty() && synthetic.size() != audio.rows()) {
        throw ContractError("training set synthetic flags differ from pair count");
    }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n_items, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch) {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start + batch_size <= n_items; start += batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
    }
    return batches;
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t salt, std::size_t a = 0, std::size_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt,
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

constexpr std::uint32_t kMixSalt = 0x6d6978;      // "mix"
constexpr std::uint32_t kWordSalt = 0x776f7264;   // "word"

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> idx) {
    DenseMatrix out(idx.size(), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = m.row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace

void append_mixed_pairs(TrainingSet& set, std::size_t count, std::uint64_t seed, PairLabels* labels) {
    set.validate();
    const std::size_t n = set.size();
    if (count == 0) return;
    if (n < 2) throw DataError("mixing needs at least two source pairs");
    if (set.synthetic.empty()) set.synthetic.assign(n, false);
    auto rng = stream(seed, kMixSalt);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> audio(set.audio.values().begin(), set.audio.values().end());
    std::vector<double> text(set.text.values().begin(), set.text.values().end());
    const std::vector<std::string> no_caption;
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        while (b == a) b = pick(rng);
        const auto cap = [&](std::size_t i) -> std::span<const std::string> {
            return set.captions.empty() ? std::span<const std::string>(no_caption) : set.captions[i];
        };
        MixedPair mixed = mix_pairs({set.audio.row(a), set.text.row(a), cap(a)},
                                    {set.audio.row(b), set.text.row(b), cap(b)});
        audio.insert(audio.end(), mixed.audio.begin(), mixed.audio.end());
        text.insert(text.end(), mixed.text.begin(), mixed.text.end());
        if (!set.captions.empty()) set.captions.push_back(std::move(mixed.caption));
        set.synthetic.push_back(true);
        if (labels) {
            labels->audio.push_back(labels->audio.at(a));
            labels->text.push_back(labels->text.at(a));
        }
    }
    const std::size_t total = n + count;
    set.audio = DenseMatrix(total, set.audio.cols(), std::move(audio));
    set.text = DenseMatrix(total, set.text.cols(), std::move(text));
}

LossBreakdown mean_breakdown(std::span<const LossBreakdown> entries) {
    LossBreakdown m;
    if (entries.empty()) return m;
    for (const auto& e : entries) {
        m.l_sup += e.l_sup;
        m.l_dist += e.l_dist;
        m.l_cls_audio += e.l_cls_audio;
        m.l_cls_text += e.l_cls_text;
        m.total += e.total;
    }
    const double n = static_cast<double>(entries.size());
    m.l_sup /= n;
    m.l_dist /= n;
    m.l_cls_audio /= n;
    m.l_cls_text /= n;
    m.total /= n;
    return m;
}

StageResult run_stage(const StageConfig& stage, ModelParams params, const TrainingSet& input,
                      const TrainerOptions& options, std::span<const ModelParams> teachers,
                      const PairLabels* labels) {
    stage.validate();
    input.validate();
    options.loss.validate();
    options.augmentation.validate();
    if (stage.distill != !teachers.empty()) {
        throw ConfigError(stage.distill ? "distillation enabled but no teacher checkpoints given"
                                        : "teacher checkpoints given but distillation is off");
    }
    if (stage.cluster != (labels != nullptr)) {
        throw ConfigError(stage.cluster ? "cluster stage needs pseudo-labels" : "pseudo-labels given but cluster is off");
    }
    if (!(options.warmup_fraction >= 0.0 && options.warmup_fraction < 1.0)) {
        throw ConfigError("warmup_fraction must lie in [0, 1)");
    }

    TrainingSet data = input;
    std::optional<PairLabels> pair_labels;
    if (labels) {
        if (labels->audio.size() != data.size() || labels->text.size() != data.size()) {
            throw DataError("pseudo-label count does not match the training pairs");
        }
        if (labels->clusters == 0) throw DataError("pseudo-labels carry zero clusters");
        pair_labels = *labels;
        attach_heads(params, labels->clusters, options.seed);
    }
    if (stage.augmentation && options.augmentation.mix_count > 0) {
        append_mixed_pairs(data, options.augmentation.mix_count, options.seed,
                           pair_labels ? &*pair_labels : nullptr);
    }

    LossConfig loss_cfg = options.loss;
    if (!stage.distill) loss_cfg.lambda1 = 0.0;
    if (!stage.cluster) loss_cfg.lambda2 = 0.0;

    StageResult result;
    const std::size_t per_epoch = data.size() / stage.batch_size;
    const std::size_t total_steps = per_epoch * stage.epochs;
    if (total_steps == 0) {
        result.params = std::move(params);
        return result;
    }
    result.schedule.total_steps = total_steps;
    result.schedule.warmup_steps =
        static_cast<std::size_t>(std::floor(options.warmup_fraction * static_cast<double>(total_steps)));
    result.schedule.peak_lr = options.peak_lr;
    result.schedule.floor_lr = options.floor_lr;
    result.schedule.validate();

    OptimizerState opt = OptimizerState::for_params(params, options.optimizer);
    const bool word_edits = stage.augmentation && !data.captions.empty();
    const std::size_t d_text = data.text.cols();
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < stage.epochs; ++epoch) {
        const auto batches = make_batches(data.size(), stage.batch_size, options.seed, epoch);
        const std::size_t first = result.step_log.size();
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& idx = batches[b];
            TrainingBatch batch{gather_rows(data.audio, idx), gather_rows(data.text, idx), std::nullopt, std::nullopt};
            if (word_edits) {
                auto rng = stream(options.seed, kWordSalt, epoch, b);
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    const auto& caption = data.captions[idx[r]];
                    if (caption.empty()) continue;
                    const AugmentedCaption edited = augment_caption(caption, options.augmentation, rng);
                    if (edited.edit == WordEdit::none) continue;
                    const auto before = bag_of_words(caption, d_text);
                    const auto after = bag_of_words(edited.tokens, d_text);
                    auto row = batch.text.row(r);
                    for (std::size_t k = 0; k < d_text; ++k) {
                        row[k] += options.augmentation.word_feature_scale * (after[k] - before[k]);
                    }
                }
            }
            if (pair_labels) {
                std::vector<std::size_t> la(idx.size()), lc(idx.size());
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    la[r] = pair_labels->audio[idx[r]];
                    lc[r] = pair_labels->text[idx[r]];
                }
                batch.audio_labels = std::move(la);
                batch.text_labels = std::move(lc);
            }
            std::optional<TeacherTargets> targets;
            if (stage.distill) targets = teacher_targets_for_batch(teachers, batch, loss_cfg);

            LossAndGradients lg = loss_and_gradients(params, batch, targets ? &*targets : nullptr, loss_cfg);
            ++step;
            adamw_step(opt, params, lg.gradients, lr_at_step(result.schedule, step));
            result.step_log.push_back(lg.breakdown);
        }
        result.epoch_means.push_back(mean_breakdown(
            std::span<const LossBreakdown>(result.step_log).subspan(first)));
    }
    result.params = std::move(params);
    return result;
}

}  // namespace xmrt
