#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmrt {

using SynonymTable = std::map<std::string, std::vector<std::string>>;

struct AugmentationConfig {
    double word_edit_probability = 0.8;
    SynonymTable synonyms;
    std::size_t mix_count = 0;
    std::uint64_t rng_seed = 0;
    // Magnitude of the text-feature shift caused by a word edit.
    double word_feature_scale = 0.1;

    void validate() const;
};

enum class WordEdit { none, deletion, replacement };

struct AugmentedCaption {
    std::vector<std::string> tokens;
    WordEdit edit = WordEdit::none;
    std::size_t position = 0;
};

// With probability word_edit_probability, one uniformly chosen word is
// deleted or swapped for a synonym (fair coin). A swap without a known
// synonym, or deleting the last remaining word, leaves the caption as is.
AugmentedCaption augment_caption(std::span<const std::string> tokens, const AugmentationConfig& cfg,
                                 std::mt19937_64& rng);

// Feature-space stand-in for mixing two audio clips and merging captions.
struct MixablePair {
    std::span<const double> audio;
    std::span<const double> text;
    std::span<const std::string> caption;
};

struct MixedPair {
    std::vector<double> audio;
    std::vector<double> text;
    std::vector<std::string> caption;
    bool synthetic = true;
};

MixedPair mix_pairs(const MixablePair& a, const MixablePair& b);

// Deterministic pseudo-embedding for a word, entries in [-1, 1].
std::vector<double> word_vector(std::string_view word, std::size_t dim);

// Mean word vector of a caption (zero vector for an empty caption).
std::vector<double> bag_of_words(std::span<const std::string> tokens, std::size_t dim);

// One line per headword: "word<TAB>syn1,syn2,...". '#' starts a comment.
SynonymTable parse_synonyms(std::string_view text);
SynonymTable load_synonyms(const std::filesystem::path& path);

std::vector<std::string> split_words(std::string_view caption);
std::string join_words(std::span<const std::string> tokens);

}  // namespace xmrt
