#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xmrt/core_math.hpp"

namespace xmrt {

inline constexpr int kOutlier = -1;

struct ClusterConfig {
    std::size_t reduced_dim = 5;
    std::size_t min_cluster_size = 5;
    double neighborhood_radius = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClusterAssignment {
    std::vector<int> labels;    // cluster id in [0, clusters) or kOutlier
    DenseMatrix probabilities;  // N x clusters, softmax over negative centroid distances
    std::size_t clusters = 0;
    DenseMatrix centroids;      // clusters x reduced_dim

    std::size_t outlier_count() const;
};

// Principal-component projection of the centered rows onto the top
// `reduced_dim` directions, ordered by decreasing variance. Each direction is
// signed so that its largest-magnitude loading is positive.
DenseMatrix reduce_dimensionality(const DenseMatrix& embeddings, std::size_t reduced_dim);

// Radius-density clustering: points with at least min_cluster_size
// neighbours (self included) within the radius are cores; cores linked
// within the radius share a cluster, and every other point within reach of
// a core joins its nearest core's cluster. Ids follow scan order.
ClusterAssignment density_cluster(const DenseMatrix& points, const ClusterConfig& cfg);

// Gives every outlier the most probable cluster. Ties go to the lowest id.
ClusterAssignment reassign_outliers(ClusterAssignment assignment, const DenseMatrix& points);

// reduce -> density cluster -> reassign outliers.
ClusterAssignment cluster_embeddings(const DenseMatrix& embeddings, const ClusterConfig& cfg);

struct PseudoLabels {
    std::vector<std::size_t> caption;
    std::vector<std::size_t> audio;
    std::size_t clusters = 0;
};

// Captions keep their cluster; each audio item takes the majority label of
// its captions, ties going to the lowest label.
PseudoLabels build_pseudo_labels(const ClusterAssignment& assignment, std::span<const std::size_t> caption_to_audio,
                                 std::size_t audio_count);

}  // namespace xmrt
