#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmrt/core_math.hpp"

namespace xmrt {

// For each caption query, the gallery (audio) indices that count as hits.
// The first entry of each set is the query's paired item, which single
// annotation mode keeps on its own.
struct RelevanceMap {
    std::vector<std::vector<std::size_t>> relevant;
    std::size_t gallery_size = 0;

    std::size_t query_count() const { return relevant.size(); }
    void validate() const;

    static RelevanceMap one_to_one(std::size_t n);
};

struct MetricsReport {
    double map_at_10 = 0.0;
    double map_at_16 = 0.0;
    double r_at_1 = 0.0;
    double r_at_5 = 0.0;
    double r_at_10 = 0.0;
    std::size_t query_count = 0;
};

enum class AnnotationMode { multiple, single };

std::string to_string(AnnotationMode mode);
AnnotationMode parse_annotation_mode(std::string_view name);

// Gallery ids by descending score; equal scores keep ascending id order.
std::vector<std::size_t> rank_gallery(std::span<const double> scores);

// Truncated AP: sum of precision@r over relevant hits at r <= k, divided by min(|relevant|, k).
double average_precision_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant,
                              std::size_t k);

double recall_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant, std::size_t k);

// Text-to-audio retrieval: `sim` is audio x caption, each column is one
// query scored against every audio row.
MetricsReport evaluate(const DenseMatrix& sim, const RelevanceMap& relevance, AnnotationMode mode);

// mAP@16 alone; the grid-search objective.
double map_at_16(const DenseMatrix& sim, const RelevanceMap& relevance);

// One line per query: whitespace-separated gallery indices, paired item first.
RelevanceMap parse_relevance(std::string_view text, std::size_t gallery_size);
RelevanceMap load_relevance(const std::filesystem::path& path, std::size_t gallery_size);
std::string format_relevance(const RelevanceMap& relevance);

}  // namespace xmrt
