#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "xmrt/core_math.hpp"

namespace xmrt::test {

struct Blobs {
    DenseMatrix points;
    std::vector<int> truth;
};

// Three isotropic Gaussian blobs in the plane at the corners of an
// equilateral triangle with side `spacing`.
inline Blobs three_blobs(std::size_t per_blob, double sigma, double spacing, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    const double cx[3] = {0.0, spacing, spacing / 2.0};
    const double cy[3] = {0.0, 0.0, spacing * std::numbers::sqrt3 / 2.0};
    Blobs b;
    std::vector<double> v;
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < per_blob; ++i) {
            v.push_back(cx[k] + noise(rng));
            v.push_back(cy[k] + noise(rng));
            b.truth.push_back(k);
        }
    b.points = DenseMatrix(3 * per_blob, 2, std::move(v));
    return b;
}

// Fraction of points whose cluster's majority truth label matches their own.
inline double purity(const std::vector<int>& labels, const std::vector<int>& truth) {
    std::map<int, std::map<int, std::size_t>> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) ++counts[labels[i]][truth[i]];
    std::size_t agree = 0;
    for (const auto& [label, by_truth] : counts) {
        std::size_t best = 0;
        for (const auto& [t, c] : by_truth) best = std::max(best, c);
        agree += best;
    }
    return static_cast<double>(agree) / static_cast<double>(labels.size());
}

// True when the two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto [it1, new1] = ab.emplace(a[i], b[i]);
        const auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) return false;
    }
    return true;
}

}  // namespace xmrt::test
