#pragma once

#include "merge/ingest.hpp"
#include "merge/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace merge {

struct KMeansResult {
    std::vector<int> assignments;        ///< length n, ids in [0, c)
    Matrix means;                        ///< c x p
    std::vector<double> inertia_history; ///< objective after each update step
    int iterations = 0;
    bool converged = false;
    /// Fewer distinct means than clusters (e.g. all points identical).
    bool degenerate = false;
};

/// Lloyd's algorithm with k-means++ seeding.
///
/// Points are processed in a canonical (lexicographically sorted) order and
/// the seeding PRNG is keyed by (seed, hash of the sorted data), so permuting
/// the input rows permutes the assignments and nothing else. Assignment ties
/// keep the current cluster, otherwise go to the lowest id. A cluster that
/// empties out takes the point farthest from its assigned mean (among
/// clusters with more than one member).
KMeansResult kmeans(const Matrix& points, int c, std::uint64_t seed, int max_iter = 300);

enum class ClusterKind { spatial, feature };

struct ClusterModel {
    ClusterKind kind = ClusterKind::spatial;
    std::vector<int> assignments;
    std::vector<std::size_t> centroid_spot;
    int c = 0;
    int target_cluster_size = 0;
    bool degenerate = false;

    std::vector<std::vector<std::size_t>> members() const;
};

/// ceil(n / target_cluster_size), at least 1.
int cluster_count(std::size_t n, int target_cluster_size);

/// k-means on grid (row, col); centroid spots chosen in embedding space.
ClusterModel cluster_spatial(const STSample& sample, const EmbeddingMatrix& embeddings,
                             int target_cluster_size, std::uint64_t seed);
/// k-means on embedding rows.
ClusterModel cluster_feature(const EmbeddingMatrix& embeddings, int target_cluster_size,
                             std::uint64_t seed);

/// Member closest (Euclidean) to the members' mean embedding; ties go to the
/// smallest spot index.
std::size_t select_centroid_spot(std::span<const std::size_t> members,
                                 const EmbeddingMatrix& embeddings);

/// Throws merge::Error if the model is not a valid partition of n spots.
void validate(const ClusterModel& model, std::size_t n);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

} // namespace merge
