#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/evaluation.hpp"
#include "xmrt/trainer.hpp"

namespace xmrt {

enum class Split { train, val, test };

std::string to_string(Split split);
Split parse_split(std::string_view name);

// Audio items and their captions. Every caption pairs with exactly one
// audio item; an audio item may carry several captions.
struct Corpus {
    std::vector<std::string> audio_ids;
    DenseMatrix audio_features;  // one row per audio item
    std::vector<Split> audio_split;

    std::vector<std::string> caption_ids;
    DenseMatrix caption_features;  // one row per caption
    std::vector<std::vector<std::string>> captions;
    std::vector<std::size_t> caption_audio;  // caption -> audio index

    std::size_t audio_count() const { return audio_ids.size(); }
    std::size_t caption_count() const { return caption_ids.size(); }
    void validate() const;
};

// Indices into a corpus for one split. Captions are the retrieval queries,
// audio items the gallery.
struct SplitView {
    std::vector<std::size_t> audio;
    std::vector<std::size_t> captions;
    std::vector<std::size_t> caption_to_local_audio;
};

SplitView split_view(const Corpus& corpus, Split split);

// One training pair per caption of the split.
TrainingSet training_pairs(const Corpus& corpus, const SplitView& view, bool synthetic = false);

// Each caption query's only relevant item is its paired audio.
RelevanceMap paired_relevance(const SplitView& view);

DenseMatrix gallery_features(const Corpus& corpus, const SplitView& view);
DenseMatrix query_features(const Corpus& corpus, const SplitView& view);

// Tab-separated manifest with header
//   audio_id  caption_id  audio_ref  caption_ref  split  caption
// where a ref is "<tensor file>:<row>" relative to the manifest directory.
Corpus load_manifest(const std::filesystem::path& path);

// Writes <dir>/audio.xmrt, <dir>/text.xmrt and <dir>/manifest.tsv.
void write_manifest(const std::filesystem::path& dir, const Corpus& corpus);

// Appends externally generated pairs (e.g. paraphrased captions) to a
// training set, flagged synthetic.
void append_imported_pairs(TrainingSet& set, const Corpus& imported);

}  // namespace xmrt
