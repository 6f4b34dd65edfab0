#pragma once

#include "merge/metrics.hpp"
#include "merge/train.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace merge {

/// Fold index per sample. Depends only on the set of sample ids and the
/// seed: ids are sorted, shuffled with the seed and dealt round-robin.
std::vector<int> fold_assignment(std::span<const std::string> sample_ids, int folds, std::uint64_t seed);

using Predictor = std::function<Matrix(const GraphSample&)>;
/// Fits on `train`; `heldout` is available for replicate selection.
using Learner = std::function<Predictor(std::span<const GraphSample> train, std::span<const GraphSample> heldout)>;

struct FoldReport {
    int fold = 0;
    std::vector<std::string> test_ids;
    std::vector<MetricsReport> per_sample;
    MetricsReport metrics; ///< mean over the fold's test slides
};

struct CvReport {
    std::vector<FoldReport> folds;
    MetricsReport mean; ///< mean over folds
};

/// Slide-level k-fold cross-validation. Throws if there are fewer samples
/// than folds.
CvReport cross_validate(std::span<const GraphSample> samples, int folds, std::uint64_t seed, const Learner& learner);

Learner gat_learner(const GatArchitecture& arch, const TrainConfig& config);
Learner linear_learner(double ridge = 1e-3);

} // namespace merge
