#include "xmrt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmrt/errors.hpp"

namespace xmrt {

void LossConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be nonnegative");
}

namespace {

void require_square(const DenseMatrix& sim, const char* who) {
    if (sim.rows() != sim.cols() || sim.rows() == 0) {
        throw ContractError(std::string(who) + ": expected a non-empty square similarity matrix, got " +
                            std::to_string(sim.rows()) + "x" + std::to_string(sim.cols()));
    }
}

// -(1/N) sum_i log q[i,i] for both directions.
double diagonal_cross_entropy(const DenseMatrix& log_q) {
    double total = 0.0;
    for (std::size_t i = 0; i < log_q.rows(); ++i) total -= log_q(i, i);
    return total / static_cast<double>(log_q.rows());
}

double soft_cross_entropy(const ProbabilityMatrix& p, const DenseMatrix& log_q) {
    const auto pv = p.probs.values();
    const auto lq = log_q.values();
    double total = 0.0;
    for (std::size_t k = 0; k < pv.size(); ++k) {
        if (pv[k] != 0.0) total -= pv[k] * lq[k];
    }
    return total / static_cast<double>(p.distribution_count());
}

void check_targets(const TeacherTargets& targets, const DenseMatrix& sim) {
    const auto same = [&](const DenseMatrix& m) { return m.rows() == sim.rows() && m.cols() == sim.cols(); };
    if (!same(targets.audio.probs) || !same(targets.text.probs)) {
        throw ContractError("teacher targets do not match the similarity shape");
    }
    if (targets.audio.axis != Axis::over_audios || targets.text.axis != Axis::over_captions) {
        throw ContractError("teacher targets have the wrong axes");
    }
}

void check_labels(std::span<const std::size_t> labels, std::size_t rows, std::size_t clusters) {
    if (labels.size() != rows) {
        throw DataError("expected " + std::to_string(rows) + " labels, got " + std::to_string(labels.size()));
    }
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] >= clusters) {
            throw DataError("label " + std::to_string(labels[n]) + " at row " + std::to_string(n) +
                            " is outside [0, " + std::to_string(clusters) + ")");
        }
    }
}

}  // namespace

double supervised_contrastive_loss(const DenseMatrix& sim, const LossConfig& cfg) {
    require_square(sim, "supervised_contrastive_loss");
    cfg.validate();
    return diagonal_cross_entropy(log_softmax_with_temperature(sim, cfg.tau, Axis::over_audios)) +
           diagonal_cross_entropy(log_softmax_with_temperature(sim, cfg.tau, Axis::over_captions));
}

DenseMatrix ensemble_average(std::span<const DenseMatrix> similarities) {
    if (similarities.empty()) throw ContractError("ensemble_average: no similarity matrices");
    const auto& first = similarities.front();
    if (similarities.size() == 1) return first;
    DenseMatrix avg(first.rows(), first.cols());
    for (const auto& s : similarities) {
        if (s.rows() != first.rows() || s.cols() != first.cols()) {
            throw ContractError("ensemble_average: similarity shapes differ");
        }
    }
    const double m = static_cast<double>(similarities.size());
    auto out = avg.values();
    // Summing in sorted order makes the result independent of teacher order.
    std::vector<double> column(similarities.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (std::size_t t = 0; t < similarities.size(); ++t) column[t] = similarities[t].values()[k];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column) sum += v;
        out[k] = sum / m;
    }
    return avg;
}

TeacherTargets teacher_soft_targets(const DenseMatrix& avg_sim, const LossConfig& cfg,
                                    std::size_t teacher_count) {
    if (!avg_sim.all_finite()) throw DomainError("teacher similarity has non-finite entries");
    if (teacher_count == 0) throw ContractError("teacher count must be at least one");
    return {softmax_with_temperature(avg_sim, cfg.tau, Axis::over_audios),
            softmax_with_temperature(avg_sim, cfg.tau, Axis::over_captions), teacher_count};
}

double distillation_loss(const TeacherTargets& targets, const DenseMatrix& sim, const LossConfig& cfg) {
    check_targets(targets, sim);
    cfg.validate();
    return soft_cross_entropy(targets.audio, log_softmax_with_temperature(sim, cfg.tau, Axis::over_audios)) +
           soft_cross_entropy(targets.text, log_softmax_with_temperature(sim, cfg.tau, Axis::over_captions));
}

double target_entropy(const TeacherTargets& targets) {
    return entropy(targets.audio) + entropy(targets.text);
}

double classification_loss(const DenseMatrix& logits, std::span<const std::size_t> labels) {
    check_labels(labels, logits.rows(), logits.cols());
    if (logits.rows() == 0) return 0.0;
    const DenseMatrix log_p = log_softmax_with_temperature(logits, 1.0, Axis::over_captions);
    double total = 0.0;
    for (std::size_t n = 0; n < labels.size(); ++n) total -= log_p(n, labels[n]);
    return total / static_cast<double>(labels.size());
}

LossBreakdown combined_loss(double l_sup, double l_dist, double l_cls_audio, double l_cls_text,
                            const LossConfig& cfg) {
    if (l_sup < 0.0 || l_dist < 0.0 || l_cls_audio < 0.0 || l_cls_text < 0.0) {
        throw ContractError("loss components must be nonnegative");
    }
    LossBreakdown b{l_sup, l_dist, l_cls_audio, l_cls_text, 0.0};
    b.total = l_sup + cfg.lambda1 * l_dist + cfg.lambda2 * (l_cls_audio + l_cls_text);
    return b;
}

DenseMatrix batch_similarity(const ModelParams& params, const DenseMatrix& audio, const DenseMatrix& text) {
    return cosine_similarity_matrix(encode(params.audio_encoder, audio), encode(params.text_encoder, text));
}

TeacherTargets teacher_targets_for_batch(std::span<const ModelParams> teachers, const TrainingBatch& batch,
                                         const LossConfig& cfg) {
    if (teachers.empty()) throw ConfigError("distillation needs at least one teacher");
    std::vector<DenseMatrix> sims;
    sims.reserve(teachers.size());
    for (const auto& t : teachers) sims.push_back(batch_similarity(t, batch.audio, batch.text));
    return teacher_soft_targets(ensemble_average(sims), cfg, teachers.size());
}

HeadLossResult head_loss_and_gradients(const ClassificationHead& head, const DenseMatrix& embeddings,
                                       std::span<const std::size_t> labels) {
    const std::size_t n = embeddings.rows();
    const std::size_t hidden = head.hidden_dim();
    const std::size_t k = head.clusters();
    check_labels(labels, n, k);

    const DenseMatrix pre = head_preactivations(head, embeddings);
    const DenseMatrix logits = classify(head, embeddings);
    const DenseMatrix log_p = log_softmax_with_temperature(logits, 1.0, Axis::over_captions);

    HeadLossResult r;
    r.gradients.w1 = DenseMatrix(hidden, head.embedding_dim());
    r.gradients.b1.assign(hidden, 0.0);
    r.gradients.w2 = DenseMatrix(k, hidden);
    r.gradients.b2.assign(k, 0.0);
    r.embedding_gradients = DenseMatrix(n, head.embedding_dim());
    if (n == 0) return r;

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> d_logits(k);
    std::vector<double> d_pre(hidden);
    for (std::size_t row = 0; row < n; ++row) {
        r.loss -= log_p(row, labels[row]);
        for (std::size_t c = 0; c < k; ++c) {
            d_logits[c] = (std::exp(log_p(row, c)) - (c == labels[row] ? 1.0 : 0.0)) * inv_n;
        }
        const auto h = pre.row(row);
        for (std::size_t c = 0; c < k; ++c) {
            r.gradients.b2[c] += d_logits[c];
            auto gw2 = r.gradients.w2.row(c);
            for (std::size_t j = 0; j < hidden; ++j) gw2[j] += d_logits[c] * std::max(h[j], 0.0);
        }
        for (std::size_t j = 0; j < hidden; ++j) {
            double acc = 0.0;
            if (h[j] > 0.0) {
                for (std::size_t c = 0; c < k; ++c) acc += d_logits[c] * head.w2(c, j);
            }
            d_pre[j] = acc;
        }
        const auto e = embeddings.row(row);
        auto de = r.embedding_gradients.row(row);
        for (std::size_t j = 0; j < hidden; ++j) {
            if (d_pre[j] == 0.0) continue;
            r.gradients.b1[j] += d_pre[j];
            auto gw1 = r.gradients.w1.row(j);
            const auto w1 = head.w1.row(j);
            for (std::size_t m = 0; m < e.size(); ++m) {
                gw1[m] += d_pre[j] * e[m];
                de[m] += d_pre[j] * w1[m];
            }
        }
    }
    r.loss *= inv_n;
    return r;
}

namespace {

void scale_add(std::span<double> dst, std::span<const double> src, double scale) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
}

void accumulate_head(ClassificationHead& dst, const ClassificationHead& src, double scale) {
    scale_add(dst.w1.values(), src.w1.values(), scale);
    scale_add(dst.b1, src.b1, scale);
    scale_add(dst.w2.values(), src.w2.values(), scale);
    scale_add(dst.b2, src.b2, scale);
}

// dL/dW = G^T X, dL/db = column sums of G.
void accumulate_encoder(LinearEncoder& dst, const DenseMatrix& grad_out, const DenseMatrix& features) {
    for (std::size_t n = 0; n < features.rows(); ++n) {
        const auto g = grad_out.row(n);
        const auto x = features.row(n);
        for (std::size_t o = 0; o < g.size(); ++o) {
            dst.bias[o] += g[o];
            auto w = dst.weight.row(o);
            for (std::size_t k = 0; k < x.size(); ++k) w[k] += g[o] * x[k];
        }
    }
}

struct Normalized {
    DenseMatrix unit;
    std::vector<double> norms;
};

Normalized normalize_rows(const DenseMatrix& m, const char* modality) {
    Normalized out{DenseMatrix(m.rows(), m.cols()), std::vector<double>(m.rows())};
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double sq = 0.0;
        for (double v : m.row(r)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0)) {
            throw DomainError(std::string("zero-norm ") + modality + " embedding at batch row " + std::to_string(r));
        }
        out.norms[r] = norm;
        auto u = out.unit.row(r);
        const auto src = m.row(r);
        for (std::size_t k = 0; k < u.size(); ++k) u[k] = src[k] / norm;
    }
    return out;
}

// Pulls a gradient w.r.t. unit vectors back through x -> x/|x|.
DenseMatrix normalization_backward(const DenseMatrix& grad_unit, const Normalized& n) {
    DenseMatrix out(grad_unit.rows(), grad_unit.cols());
    for (std::size_t r = 0; r < grad_unit.rows(); ++r) {
        const auto g = grad_unit.row(r);
        const auto u = n.unit.row(r);
        double radial = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) radial += g[k] * u[k];
        auto o = out.row(r);
        for (std::size_t k = 0; k < g.size(); ++k) o[k] = (g[k] - radial * u[k]) / n.norms[r];
    }
    return out;
}

}  // namespace

LossAndGradients loss_and_gradients(const ModelParams& params, const TrainingBatch& batch,
                                    const TeacherTargets* targets, const LossConfig& cfg) {
    cfg.validate();
    const std::size_t n = batch.size();
    if (n == 0 || batch.text.rows() != n) {
        throw ContractError("batch needs matching, non-empty audio and text rows");
    }
    const bool use_dist = targets != nullptr;
    const bool use_cls = batch.audio_labels.has_value() || batch.text_labels.has_value();
    if (cfg.lambda1 > 0.0 && !use_dist) throw ConfigError("lambda1 > 0 requires teacher targets");
    if (cfg.lambda2 > 0.0 && !use_cls) throw ConfigError("lambda2 > 0 requires pseudo-labels");
    if (use_cls) {
        if (!batch.audio_labels || !batch.text_labels) {
            throw ConfigError("pseudo-labels must be given for both modalities");
        }
        if (!params.has_heads()) throw ConfigError("pseudo-labels given but the model has no classification heads");
    }

    const DenseMatrix emb_a = encode(params.audio_encoder, batch.audio);
    const DenseMatrix emb_c = encode(params.text_encoder, batch.text);
    const Normalized na = normalize_rows(emb_a, "audio");
    const Normalized nc = normalize_rows(emb_c, "text");

    const std::size_t d = emb_a.cols();
    if (emb_c.cols() != d) throw ContractError("encoder output widths differ");
    DenseMatrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const auto a = na.unit.row(i);
            const auto c = nc.unit.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += a[k] * c[k];
            sim(i, j) = dot;
        }

    const DenseMatrix log_qa = log_softmax_with_temperature(sim, cfg.tau, Axis::over_audios);
    const DenseMatrix log_qc = log_softmax_with_temperature(sim, cfg.tau, Axis::over_captions);

    LossBreakdown parts;
    parts.l_sup = diagonal_cross_entropy(log_qa) + diagonal_cross_entropy(log_qc);

    // dL/dS: each mean-reduced softmax cross-entropy contributes (q - p) / (N tau).
    const double scale = 1.0 / (static_cast<double>(n) * cfg.tau);
    DenseMatrix grad_sim(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double qa = std::exp(log_qa(i, j));
            const double qc = std::exp(log_qc(i, j));
            const double onehot = i == j ? 1.0 : 0.0;
            grad_sim(i, j) = scale * ((qa - onehot) + (qc - onehot));
        }

    if (use_dist) {
        check_targets(*targets, sim);
        parts.l_dist = soft_cross_entropy(targets->audio, log_qa) + soft_cross_entropy(targets->text, log_qc);
        const double w = cfg.lambda1 * scale;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double qa = std::exp(log_qa(i, j));
                const double qc = std::exp(log_qc(i, j));
                grad_sim(i, j) += w * ((qa - targets->audio.probs(i, j)) + (qc - targets->text.probs(i, j)));
            }
    }

    DenseMatrix grad_unit_a(n, d);
    DenseMatrix grad_unit_c(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double g = grad_sim(i, j);
            if (g == 0.0) continue;
            auto ga = grad_unit_a.row(i);
            auto gc = grad_unit_c.row(j);
            const auto a = na.unit.row(i);
            const auto c = nc.unit.row(j);
            for (std::size_t k = 0; k < d; ++k) {
                ga[k] += g * c[k];
                gc[k] += g * a[k];
            }
        }
    DenseMatrix grad_emb_a = normalization_backward(grad_unit_a, na);
    DenseMatrix grad_emb_c = normalization_backward(grad_unit_c, nc);

    ParamGradients grads{zeros_like(params)};
    if (use_cls) {
        const HeadLossResult ha = head_loss_and_gradients(*params.audio_head, emb_a, *batch.audio_labels);
        const HeadLossResult hc = head_loss_and_gradients(*params.text_head, emb_c, *batch.text_labels);
        parts.l_cls_audio = ha.loss;
        parts.l_cls_text = hc.loss;
        accumulate_head(*grads.values.audio_head, ha.gradients, cfg.lambda2);
        accumulate_head(*grads.values.text_head, hc.gradients, cfg.lambda2);
        scale_add(grad_emb_a.values(), ha.embedding_gradients.values(), cfg.lambda2);
        scale_add(grad_emb_c.values(), hc.embedding_gradients.values(), cfg.lambda2);
    }

    accumulate_encoder(grads.values.audio_encoder, grad_emb_a, batch.audio);
    accumulate_encoder(grads.values.text_encoder, grad_emb_c, batch.text);

    return {combined_loss(parts.l_sup, parts.l_dist, parts.l_cls_audio, parts.l_cls_text, cfg), std::move(grads)};
}

}  // namespace xmrt
