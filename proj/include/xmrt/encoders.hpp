#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmrt/core_math.hpp"

namespace xmrt {

enum class Modality { audio, text };

// Single affine layer W x + b mapping features into the shared space.
struct LinearEncoder {
    DenseMatrix weight;  // d_out x d_in
    std::vector<double> bias;
    Modality modality = Modality::audio;

    std::size_t input_dim() const { return weight.cols(); }
    std::size_t output_dim() const { return weight.rows(); }
};

// Two linear layers with a ReLU between them. The hidden width is always
// three times the embedding width.
struct ClassificationHead {
    DenseMatrix w1;  // 3*d_emb x d_emb
    std::vector<double> b1;
    DenseMatrix w2;  // K x 3*d_emb
    std::vector<double> b2;

    std::size_t embedding_dim() const { return w1.cols(); }
    std::size_t hidden_dim() const { return w1.rows(); }
    std::size_t clusters() const { return w2.rows(); }
};

inline constexpr std::size_t kHeadWidthFactor = 3;

struct ModelParams {
    LinearEncoder audio_encoder;
    LinearEncoder text_encoder;
    std::optional<ClassificationHead> audio_head;
    std::optional<ClassificationHead> text_head;
    std::uint64_t rng_seed = 0;

    bool has_heads() const { return audio_head.has_value() && text_head.has_value(); }
    std::size_t embedding_dim() const { return audio_encoder.output_dim(); }
};

// Named, shaped view over one parameter tensor. Used by the optimizer,
// gradient checks and checkpoint I/O so they share one traversal order.
template <typename T>
struct TensorRef {
    std::string name;
    std::vector<std::size_t> dims;
    std::span<T> data;
};

std::vector<TensorRef<double>> tensors(ModelParams& params);
std::vector<TensorRef<const double>> tensors(const ModelParams& params);

// Same layout as the parameters, holding d(loss)/d(parameter).
struct ParamGradients {
    ModelParams values;
};

ModelParams zeros_like(const ModelParams& params);
void check_same_layout(const ModelParams& a, const ModelParams& b);

// Weights ~ uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ModelParams init_params(std::size_t d_in_audio, std::size_t d_in_text, std::size_t d_emb,
                        std::optional<std::size_t> clusters, std::uint64_t seed);

ClassificationHead init_head(std::size_t d_emb, std::size_t clusters, std::uint64_t seed);

// Adds fresh classification heads (K clusters) to a model that has none,
// or replaces heads whose cluster count differs.
void attach_heads(ModelParams& params, std::size_t clusters, std::uint64_t seed);

DenseMatrix encode(const LinearEncoder& encoder, const DenseMatrix& features);
EmbeddingBatch encode(const LinearEncoder& encoder, const FeatureBatch& features);

DenseMatrix classify(const ClassificationHead& head, const DenseMatrix& embeddings);

// Hidden pre-activations W1 e + b1, one row per embedding.
DenseMatrix head_preactivations(const ClassificationHead& head, const DenseMatrix& embeddings);

}  // namespace xmrt
