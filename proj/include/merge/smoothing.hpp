#pragma once

#include "merge/ingest.hpp"
#include "merge/matrix.hpp"

#include <vector>

namespace merge {

/// Two-factor smoothing parameters. Defaults are the ST-Net settings.
struct SpcsParams {
    int tau_s = 2;    ///< spatial radius, Manhattan grid units
    int tau_p = 16;   ///< number of pattern neighbours
    double alpha = 0.6;
    double beta = 0.4;
    int pca_dim = 10;

    /// Throws merge::Error when a field is out of range.
    void validate() const;
};

/// ln(1 + 1e6 * x_ij / rowsum_i); all-zero rows stay zero.
Matrix logcpm(const Matrix& expr);

/// Mean over each spot and its occupied 8-neighbours.
Matrix smooth_8n(const STSample& sample, const Matrix& values);
inline Matrix smooth_8n(const STSample& sample) { return smooth_8n(sample, sample.expr_raw); }

struct PcaResult {
    Matrix scores;                        ///< n x k
    Matrix components;                    ///< m x k, unit columns
    std::vector<double> explained_variance; ///< length k, non-increasing
    std::vector<double> mean;             ///< length m
};

/// Principal components of the column-centred matrix. Component signs are
/// fixed so that each component's largest-magnitude loading is positive.
PcaResult pca(const Matrix& expr, std::size_t k);
inline Matrix pca_project(const Matrix& expr, std::size_t k) { return pca(expr, k).scores; }

/// 1 - Pearson(scores_i, scores_j). Zero-variance rows give 2.
double pattern_distance(const Matrix& scores, std::size_t i, std::size_t j);

/// SPCS on a sample's raw counts (logCPM is applied first).
Matrix spcs_smooth(const STSample& sample, const SpcsParams& params);
/// SPCS on values that are already logCPM-normalised.
Matrix spcs_smooth_normalized(const STSample& sample, const Matrix& normalized,
                              const SpcsParams& params);

} // namespace merge
