#pragma once

#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/evaluation.hpp"

namespace xmrt::test {

// Two members whose fusion ranks the paired item first only for first-member
// weights w in [lower, upper]; elsewhere a competitor beats it. Gallery item
// 0 is the positive for every query, item 1 wins for small w, item 2 for large w.
struct PlantedPair {
    DenseMatrix first;
    DenseMatrix second;
    RelevanceMap relevance;
    double lower = 0.0;
    double upper = 0.0;
};

inline PlantedPair planted_pair(std::size_t gallery = 20, std::size_t queries = 3) {
    const double lower = 0.35, upper = 0.42;
    PlantedPair p;
    p.lower = lower;
    p.upper = upper;
    p.first = DenseMatrix(gallery, queries, 0.0);
    p.second = DenseMatrix(gallery, queries, 0.0);
    for (std::size_t q = 0; q < queries; ++q) {
        p.first(0, q) = 0.5;
        p.second(0, q) = 0.5;
        // Item 1: 0.5 / (1 - lower) * (1 - w) > 0.5 iff w < lower.
        p.second(1, q) = 0.5 / (1.0 - lower);
        // Item 2: 0.5 / upper * w > 0.5 iff w > upper.
        p.first(2, q) = 0.5 / upper;
        // Filler items stay below the positive everywhere.
        for (std::size_t i = 3; i < gallery; ++i) {
            p.first(i, q) = 0.1;
            p.second(i, q) = 0.1;
        }
    }
    p.relevance.gallery_size = gallery;
    p.relevance.relevant.assign(queries, {0});
    return p;
}

}  // namespace xmrt::test
