#pragma once

#include "merge/gnn.hpp"
#include "merge/ingest.hpp"
#include "merge/metrics.hpp"
#include "merge/smoothing.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace merge {

constexpr std::uint64_t kDefaultSeed = 3927;

enum class Optimizer { adam, sgd };

struct TrainConfig {
    int epochs = 400;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = kDefaultSeed;
    int replicate_count = 5;

    void validate() const;
};

/// One slide ready for the network: logical edge set, inputs and targets.
struct GraphSample {
    std::string sample_id;
    std::size_t n_nodes = 0;
    std::vector<NodePair> pairs;
    Matrix features; ///< n x d
    Matrix targets;  ///< n x m
};

struct TrainResult {
    GatModel model;
    std::vector<double> loss_curve; ///< mean training loss per epoch (selected replicate)
    int best_replicate = 0;
    std::vector<double> replicate_scores; ///< selection MSE per replicate
};

/// One replicate from a given initial model. Each epoch visits every sample
/// once (one optimisation step per sample) in a seeded order.
TrainResult train_replicate(GatModel init, std::span<const GraphSample> samples, const TrainConfig& config,
                            int replicate = 0);

/// config.replicate_count independently initialised replicates; the one with
/// the lowest eval-mode MSE on `selection` (or on the training samples when
/// `selection` is empty) is returned.
TrainResult train(const GatArchitecture& arch, std::span<const GraphSample> samples,
                  std::span<const GraphSample> selection, const TrainConfig& config);

/// Eval-mode prediction (no edge dropout).
Matrix predict(const GatModel& model, const GraphSample& sample);

/// Graph-free baseline: ridge regression from a spot's own features.
struct LinearBaseline {
    Matrix weights; ///< (d + 1) x m, last row is the intercept
};

LinearBaseline fit_linear_baseline(std::span<const GraphSample> samples, double ridge = 1e-3);
Matrix predict(const LinearBaseline& model, const Matrix& features);

enum class GraphVariant { hierarchical, one_hop, none };
enum class TargetKind { logcpm, smooth_8n, spcs };

struct PrepareOptions {
    GraphVariant variant = GraphVariant::hierarchical;
    TargetKind target = TargetKind::spcs;
    int cluster_size = 100;
    std::uint64_t seed = kDefaultSeed;
    SpcsParams spcs;
};

/// Target matrix of the requested kind for a raw-count sample.
Matrix make_targets(const STSample& sample, TargetKind kind, const SpcsParams& spcs);

/// Clusters, assembles the graph variant and computes targets.
GraphSample prepare_sample(const STSample& sample, const EmbeddingMatrix& embeddings, const PrepareOptions& options);

} // namespace merge
