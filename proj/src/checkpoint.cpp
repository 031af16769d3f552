#include "xmrt/checkpoint.hpp"

#include <fstream>
#include "json.hpp"

#include "xmrt/errors.hpp"
#include "xmrt/tensor_file.hpp"

namespace xmrt {

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kFormat = "xmrt-checkpoint";

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params) {
    std::filesystem::create_directories(dir);
    for (const auto& t : tensors(params)) {
        save_tensor(dir / (t.name + ".xmrt"), Tensor{t.dims, {t.data.begin(), t.data.end()}});
    }
    nlohmann::ordered_json meta;
    meta["format"] = kFormat;
    meta["version"] = 1;
    meta["seed"] = params.rng_seed;
    meta["embedding_dim"] = params.embedding_dim();
    meta["audio_input_dim"] = params.audio_encoder.input_dim();
    meta["text_input_dim"] = params.text_encoder.input_dim();
    meta["clusters"] = params.has_heads() ? nlohmann::ordered_json(params.audio_head->clusters()) : nlohmann::ordered_json();
    std::ofstream out(dir / kMetaFile, std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / kMetaFile).string());
    out << meta.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / kMetaFile);
    if (!in) throw IoError("no checkpoint at " + dir.string() + " (missing meta.json)");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint meta.json is not valid JSON: " + std::string(e.what()));
    }
    if (meta.value("format", "") != kFormat) throw DataError(dir.string() + " is not an xmrt checkpoint");

    const auto matrix = [&](const std::string& name) { return load_matrix(dir / (name + ".xmrt")); };
    const auto vec = [&](const std::string& name) {
        Tensor t = load_tensor(dir / (name + ".xmrt"));
        if (t.dims.size() != 1) throw DataError(name + " must be a rank-1 tensor");
        return t.values;
    };

    ModelParams p;
    p.rng_seed = meta.at("seed").get<std::uint64_t>();
    p.audio_encoder = {matrix("audio_encoder.weight"), vec("audio_encoder.bias"), Modality::audio};
    p.text_encoder = {matrix("text_encoder.weight"), vec("text_encoder.bias"), Modality::text};
    if (!meta.at("clusters").is_null()) {
        const auto head = [&](const std::string& prefix) {
            return ClassificationHead{matrix(prefix + ".w1"), vec(prefix + ".b1"), matrix(prefix + ".w2"), vec(prefix + ".b2")};
        };
        p.audio_head = head("audio_head");
        p.text_head = head("text_head");
    }

    const auto check_encoder = [](const LinearEncoder& e, const char* what) {
        if (e.bias.size() != e.output_dim()) throw DataError(std::string(what) + " bias does not match its weight");
    };
    check_encoder(p.audio_encoder, "audio encoder");
    check_encoder(p.text_encoder, "text encoder");
    if (p.audio_encoder.output_dim() != p.text_encoder.output_dim()) {
        throw DataError("audio and text encoders disagree on embedding width");
    }
    for (const auto* h : {p.audio_head ? &*p.audio_head : nullptr, p.text_head ? &*p.text_head : nullptr}) {
        if (!h) continue;
        if (h->embedding_dim() != p.embedding_dim() || h->hidden_dim() != kHeadWidthFactor * p.embedding_dim() ||
            h->b1.size() != h->hidden_dim() || h->w2.cols() != h->hidden_dim() || h->b2.size() != h->clusters()) {
            throw DataError("classification head shapes in " + dir.string() + " are inconsistent");
        }
    }
    if (p.has_heads() && p.audio_head->clusters() != p.text_head->clusters()) {
        throw DataError("audio and text heads disagree on cluster count");
    }
    return p;
}

}  // namespace xmrt
