#include "merge/crossval.hpp"

#include "merge/error.hpp"
#include "merge/seed.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace merge {

std::vector<int> fold_assignment(std::span<const std::string> ids, int folds, std::uint64_t seed) {
    if (folds < 2) throw Error("cross-validation: need at least 2 folds");
    if (ids.size() < static_cast<std::size_t>(folds))
        throw Error("fewer samples than folds (" + std::to_string(ids.size()) + " < " + std::to_string(folds) + ")");
    std::vector<std::string> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw Error("cross-validation: duplicate sample_id");
    std::mt19937_64 rng(derive_seed({seed, 0xf01d}));
    for (std::size_t i = sorted.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(sorted[i - 1], sorted[std::min(j, i - 1)]);
    }
    std::vector<int> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto pos = static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), ids[i]) - sorted.begin());
        out[i] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    }
    return out;
}

CvReport cross_validate(std::span<const GraphSample> samples, int folds, std::uint64_t seed, const Learner& learner) {
    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.sample_id);
    const auto assignment = fold_assignment(ids, folds, seed);

    CvReport report;
    std::vector<MetricsReport> fold_metrics;
    for (int f = 0; f < folds; ++f) {
        std::vector<GraphSample> train_set, test_set;
        for (std::size_t i = 0; i < samples.size(); ++i)
            (assignment[i] == f ? test_set : train_set).push_back(samples[i]);
        const auto predictor = learner(train_set, test_set);
        FoldReport fr;
        fr.fold = f;
        for (const auto& s : test_set) {
            fr.test_ids.push_back(s.sample_id);
            fr.per_sample.push_back(compute_metrics(predictor(s), s.targets));
        }
        fr.metrics = average(fr.per_sample);
        fold_metrics.push_back(fr.metrics);
        report.folds.push_back(std::move(fr));
    }
    report.mean = average(fold_metrics);
    return report;
}

Learner gat_learner(const GatArchitecture& arch, const TrainConfig& config) {
    return [arch, config](std::span<const GraphSample> train_set, std::span<const GraphSample> heldout) -> Predictor {
        auto result = train(arch, train_set, heldout, config);
        return [model = std::move(result.model)](const GraphSample& s) { return predict(model, s); };
    };
}

Learner linear_learner(double ridge) {
    return [ridge](std::span<const GraphSample> train_set, std::span<const GraphSample>) -> Predictor {
        auto model = fit_linear_baseline(train_set, ridge);
        return [model = std::move(model)](const GraphSample& s) { return predict(model, s.features); };
    };
}

} // namespace merge
