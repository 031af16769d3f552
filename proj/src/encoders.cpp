#include "xmrt/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xmrt/errors.hpp"

namespace xmrt {

namespace {

DenseMatrix uniform_fan_in(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

LinearEncoder init_encoder(std::size_t d_in, std::size_t d_out, Modality modality,
                           std::mt19937_64& rng) {
    return {uniform_fan_in(d_out, d_in, rng), std::vector<double>(d_out, 0.0), modality};
}

ClassificationHead init_head(std::size_t d_emb, std::size_t clusters, std::mt19937_64& rng) {
    const std::size_t hidden = kHeadWidthFactor * d_emb;
    ClassificationHead head;
    head.w1 = uniform_fan_in(hidden, d_emb, rng);
    head.b1.assign(hidden, 0.0);
    head.w2 = uniform_fan_in(clusters, hidden, rng);
    head.b2.assign(clusters, 0.0);
    return head;
}

// Head parameters draw from an independent stream so attaching heads later
// does not disturb encoder initialization.
constexpr std::uint64_t kHeadStreamSalt = 0x9e3779b97f4a7c15ULL;

template <typename T, typename Params>
std::vector<TensorRef<T>> collect(Params& p) {
    std::vector<TensorRef<T>> out;
    auto add_matrix = [&](std::string name, auto& m) {
        out.push_back({std::move(name), {m.rows(), m.cols()}, m.values()});
    };
    auto add_vector = [&](std::string name, auto& v) {
        out.push_back({std::move(name), {v.size()}, std::span<T>(v.data(), v.size())});
    };
    add_matrix("audio_encoder.weight", p.audio_encoder.weight);
    add_vector("audio_encoder.bias", p.audio_encoder.bias);
    add_matrix("text_encoder.weight", p.text_encoder.weight);
    add_vector("text_encoder.bias", p.text_encoder.bias);
    auto add_head = [&](const std::string& prefix, auto& head) {
        if (!head) return;
        add_matrix(prefix + ".w1", head->w1);
        add_vector(prefix + ".b1", head->b1);
        add_matrix(prefix + ".w2", head->w2);
        add_vector(prefix + ".b2", head->b2);
    };
    add_head("audio_head", p.audio_head);
    add_head("text_head", p.text_head);
    return out;
}

}  // namespace

std::vector<TensorRef<double>> tensors(ModelParams& params) { return collect<double>(params); }

std::vector<TensorRef<const double>> tensors(const ModelParams& params) {
    return collect<const double>(params);
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    for (auto& t : tensors(z)) std::fill(t.data.begin(), t.data.end(), 0.0);
    return z;
}

void check_same_layout(const ModelParams& a, const ModelParams& b) {
    const auto ta = tensors(a);
    const auto tb = tensors(b);
    if (ta.size() != tb.size()) throw ContractError("parameter sets have different tensor counts");
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || ta[i].dims != tb[i].dims) {
            throw ContractError("parameter layout mismatch at " + ta[i].name);
        }
    }
}

ModelParams init_params(std::size_t d_in_audio, std::size_t d_in_text, std::size_t d_emb,
                        std::optional<std::size_t> clusters, std::uint64_t seed) {
    if (d_in_audio == 0 || d_in_text == 0 || d_emb == 0) {
        throw ConfigError("encoder dimensions must be positive");
    }
    if (d_emb < 2) throw ConfigError("embedding width must be at least 2");
    if (clusters && *clusters == 0) throw ConfigError("cluster count must be positive");

    std::mt19937_64 rng(seed);
    ModelParams p;
    p.rng_seed = seed;
    p.audio_encoder = init_encoder(d_in_audio, d_emb, Modality::audio, rng);
    p.text_encoder = init_encoder(d_in_text, d_emb, Modality::text, rng);
    if (clusters) attach_heads(p, *clusters, seed);
    return p;
}

ClassificationHead init_head(std::size_t d_emb, std::size_t clusters, std::uint64_t seed) {
    if (d_emb == 0 || clusters == 0) throw ConfigError("head dimensions must be positive");
    std::mt19937_64 rng(seed ^ kHeadStreamSalt);
    return init_head(d_emb, clusters, rng);
}

void attach_heads(ModelParams& params, std::size_t clusters, std::uint64_t seed) {
    if (clusters == 0) throw ConfigError("cluster count must be positive");
    if (params.has_heads() && params.audio_head->clusters() == clusters) return;
    std::mt19937_64 rng(seed ^ kHeadStreamSalt);
    const std::size_t d_emb = params.embedding_dim();
    params.audio_head = init_head(d_emb, clusters, rng);
    params.text_head = init_head(d_emb, clusters, rng);
}

DenseMatrix encode(const LinearEncoder& encoder, const DenseMatrix& features) {
    if (features.cols() != encoder.input_dim()) {
        throw ContractError("feature width " + std::to_string(features.cols()) +
                            " does not match encoder input " + std::to_string(encoder.input_dim()));
    }
    const std::size_t d_out = encoder.output_dim();
    DenseMatrix out(features.rows(), d_out);
    for (std::size_t n = 0; n < features.rows(); ++n) {
        const auto x = features.row(n);
        for (std::size_t o = 0; o < d_out; ++o) {
            const auto w = encoder.weight.row(o);
            double acc = encoder.bias[o];
            for (std::size_t k = 0; k < x.size(); ++k) acc += w[k] * x[k];
            out(n, o) = acc;
        }
    }
    return out;
}

EmbeddingBatch encode(const LinearEncoder& encoder, const FeatureBatch& features) {
    return {encode(encoder, features.values), features.ids};
}

DenseMatrix head_preactivations(const ClassificationHead& head, const DenseMatrix& embeddings) {
    if (embeddings.cols() != head.embedding_dim()) {
        throw ContractError("embedding width " + std::to_string(embeddings.cols()) +
                            " does not match head input " + std::to_string(head.embedding_dim()));
    }
    DenseMatrix hidden(embeddings.rows(), head.hidden_dim());
    for (std::size_t n = 0; n < embeddings.rows(); ++n) {
        const auto e = embeddings.row(n);
        for (std::size_t h = 0; h < head.hidden_dim(); ++h) {
            const auto w = head.w1.row(h);
            double acc = head.b1[h];
            for (std::size_t k = 0; k < e.size(); ++k) acc += w[k] * e[k];
            hidden(n, h) = acc;
        }
    }
    return hidden;
}

DenseMatrix classify(const ClassificationHead& head, const DenseMatrix& embeddings) {
    const DenseMatrix pre = head_preactivations(head, embeddings);
    DenseMatrix logits(embeddings.rows(), head.clusters());
    for (std::size_t n = 0; n < embeddings.rows(); ++n) {
        const auto h = pre.row(n);
        for (std::size_t c = 0; c < head.clusters(); ++c) {
            const auto w = head.w2.row(c);
            double acc = head.b2[c];
            for (std::size_t k = 0; k < h.size(); ++k) acc += w[k] * std::max(h[k], 0.0);
            logits(n, c) = acc;
        }
    }
    return logits;
}

}  // namespace xmrt
