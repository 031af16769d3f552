#include "xmrt/clustering.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "xmrt/errors.hpp"

namespace xmrt {

void ClusterConfig::validate() const {
    if (reduced_dim < 1) throw ConfigError("reduced_dim must be at least 1");
    if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be at least 2");
    if (!(neighborhood_radius > 0.0) || !std::isfinite(neighborhood_radius)) {
        throw ConfigError("neighborhood_radius must be positive");
    }
}

std::size_t ClusterAssignment::outlier_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        sq += d * d;
    }
    return std::sqrt(sq);
}

// Fills probabilities with softmax(-distance to centroid) for every point.
void fill_probabilities(ClusterAssignment& a, const DenseMatrix& points) {
    a.probabilities = DenseMatrix(points.rows(), a.clusters);
    if (a.clusters == 0) return;
    std::vector<double> neg(a.clusters);
    for (std::size_t n = 0; n < points.rows(); ++n) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < a.clusters; ++c) {
            neg[c] = -distance(points.row(n), a.centroids.row(c));
            peak = std::max(peak, neg[c]);
        }
        double sum = 0.0;
        for (double& v : neg) {
            v = std::exp(v - peak);
            sum += v;
        }
        for (std::size_t c = 0; c < a.clusters; ++c) a.probabilities(n, c) = neg[c] / sum;
    }
}

}  // namespace

DenseMatrix reduce_dimensionality(const DenseMatrix& embeddings, std::size_t reduced_dim) {
    const std::size_t n = embeddings.rows();
    const std::size_t d = embeddings.cols();
    if (reduced_dim < 1 || reduced_dim > std::min(n, d)) {
        throw ConfigError("reduced_dim " + std::to_string(reduced_dim) + " must lie in [1, min(N, d)] = [1, " +
                          std::to_string(std::min(n, d)) + "]");
    }
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> x(embeddings.values().data(), static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(d));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw DomainError("covariance eigendecomposition failed");

    // Eigen sorts eigenvalues ascending; take the last reduced_dim columns in reverse.
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(reduced_dim));
    for (std::size_t r = 0; r < reduced_dim; ++r) {
        Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - r));
        Eigen::Index arg = 0;
        for (Eigen::Index k = 1; k < v.size(); ++k) {
            if (std::abs(v(k)) > std::abs(v(arg))) arg = k;
        }
        if (v(arg) < 0.0) v = -v;
        basis.col(static_cast<Eigen::Index>(r)) = v;
    }
    const Eigen::MatrixXd projected = centered * basis;
    DenseMatrix out(n, reduced_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < reduced_dim; ++r)
            out(i, r) = projected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
    return out;
}

ClusterAssignment density_cluster(const DenseMatrix& points, const ClusterConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows();
    if (n < cfg.min_cluster_size) {
        throw DataError("density clustering needs at least min_cluster_size (" +
                        std::to_string(cfg.min_cluster_size) + ") points, got " + std::to_string(n));
    }
    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (distance(points.row(i), points.row(j)) <= cfg.neighborhood_radius) neighbours[i].push_back(j);
    const auto is_core = [&](std::size_t i) { return neighbours[i].size() >= cfg.min_cluster_size; };

    // Cores connected through the radius graph form clusters; ids follow the
    // scan order of each cluster's first core.
    std::vector<int> labels(n, kOutlier);
    int next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kOutlier || !is_core(i)) continue;
        const int id = next_id++;
        labels[i] = id;
        std::deque<std::size_t> frontier{i};
        while (!frontier.empty()) {
            const std::size_t q = frontier.front();
            frontier.pop_front();
            for (std::size_t r : neighbours[q]) {
                if (labels[r] != kOutlier || !is_core(r)) continue;
                labels[r] = id;
                frontier.push_back(r);
            }
        }
    }
    // Border points join the cluster of their nearest core neighbour.
    for (std::size_t i = 0; i < n; ++i) {
        if (is_core(i)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j : neighbours[i]) {
            if (!is_core(j)) continue;
            const double d = distance(points.row(i), points.row(j));
            if (d < best) {
                best = d;
                labels[i] = labels[j];
            }
        }
    }

    ClusterAssignment a;
    a.labels = std::move(labels);
    a.clusters = static_cast<std::size_t>(next_id);
    a.centroids = DenseMatrix(a.clusters, points.cols());
    std::vector<std::size_t> counts(a.clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (a.labels[i] == kOutlier) continue;
        const auto c = static_cast<std::size_t>(a.labels[i]);
        ++counts[c];
        auto centroid = a.centroids.row(c);
        const auto p = points.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) centroid[k] += p[k];
    }
    for (std::size_t c = 0; c < a.clusters; ++c)
        for (double& v : a.centroids.row(c)) v /= static_cast<double>(counts[c]);
    fill_probabilities(a, points);
    return a;
}

ClusterAssignment reassign_outliers(ClusterAssignment a, const DenseMatrix& points) {
    if (a.clusters == 0) {
        throw DataError("every point is an outlier; increase neighborhood_radius or lower min_cluster_size");
    }
    if (a.labels.size() != points.rows() || a.centroids.cols() != points.cols()) {
        throw ContractError("assignment does not match the points");
    }
    fill_probabilities(a, points);
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        if (a.labels[i] != kOutlier) continue;
        const auto row = a.probabilities.row(i);
        // max_element returns the first maximum, i.e. the lowest cluster id.
        a.labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return a;
}

ClusterAssignment cluster_embeddings(const DenseMatrix& embeddings, const ClusterConfig& cfg) {
    cfg.validate();
    const DenseMatrix reduced = reduce_dimensionality(embeddings, cfg.reduced_dim);
    return reassign_outliers(density_cluster(reduced, cfg), reduced);
}

PseudoLabels build_pseudo_labels(const ClusterAssignment& assignment, std::span<const std::size_t> caption_to_audio,
                                 std::size_t audio_count) {
    if (caption_to_audio.size() != assignment.labels.size()) {
        throw DataError("pairing covers " + std::to_string(caption_to_audio.size()) + " captions but " +
                        std::to_string(assignment.labels.size()) + " were clustered");
    }
    PseudoLabels out;
    out.clusters = assignment.clusters;
    out.caption.resize(assignment.labels.size());
    std::vector<std::vector<std::size_t>> votes(audio_count, std::vector<std::size_t>(assignment.clusters, 0));
    for (std::size_t c = 0; c < assignment.labels.size(); ++c) {
        if (assignment.labels[c] == kOutlier) {
            throw DataError("caption " + std::to_string(c) + " is still an outlier; reassign outliers first");
        }
        const std::size_t audio = caption_to_audio[c];
        if (audio >= audio_count) throw DataError("caption " + std::to_string(c) + " is paired to no audio item");
        out.caption[c] = static_cast<std::size_t>(assignment.labels[c]);
        ++votes[audio][out.caption[c]];
    }
    out.audio.resize(audio_count);
    for (std::size_t a = 0; a < audio_count; ++a) {
        const auto& v = votes[a];
        const auto best = std::max_element(v.begin(), v.end());
        if (best == v.end() || *best == 0) {
            throw DataError("audio item " + std::to_string(a) + " has no captions");
        }
        out.audio[a] = static_cast<std::size_t>(best - v.begin());
    }
    return out;
}

}  // namespace xmrt
