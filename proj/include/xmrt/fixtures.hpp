#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "xmrt/augmentation.hpp"
#include "xmrt/dataset.hpp"
#include "xmrt/evaluation.hpp"

namespace xmrt {

struct FixtureConfig {
    std::size_t n_items = 256;
    std::size_t d_latent = 8;
    std::size_t d_audio = 32;
    std::size_t d_text = 24;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
    // Extra relevant items for multiple-annotation relevance: other gallery
    // items whose latent cosine with the query's latent reaches this value.
    double multi_relevance_threshold = 0.9;

    void validate() const;
};

// Planted-alignment corpus: item k has latent z_k; audio features are
// A z_k + noise and caption features B z_k + noise for fixed random
// full-rank maps A, B. One caption per audio item; 70/15/15 split.
struct Fixture {
    Corpus corpus;
    DenseMatrix latents;    // n_items x d_latent
    DenseMatrix audio_map;  // d_audio x d_latent
    DenseMatrix text_map;   // d_text x d_latent
    SynonymTable synonyms;
};

Fixture generate_fixtures(const FixtureConfig& cfg);

// Multiple-annotation relevance over one split of a fixture.
RelevanceMap fixture_relevance(const Fixture& fixture, Split split, double threshold);

// Writes manifest.tsv, audio.xmrt, text.xmrt, synonyms.tsv and
// relevance_{val,test}.tsv into `dir`.
void write_fixtures(const std::filesystem::path& dir, const Fixture& fixture, double multi_relevance_threshold);

}  // namespace xmrt
