#pragma once

#include "merge/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace merge {

struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    /// Mean of the defined per-gene PCCs (NaN if none is defined).
    double pcc = 0.0;
    /// Per gene, across spots. NaN where truth or prediction is constant.
    std::vector<double> per_gene_pcc;
    std::size_t excluded_genes = 0;
};

/// MSE and MAE over all entries; PCC per gene across spots, then averaged.
MetricsReport compute_metrics(const Matrix& pred, const Matrix& truth);

/// Pearson correlation of two equal-length series; NaN if either is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// Element-wise mean of several reports (per-gene means skip NaN entries).
MetricsReport average(const std::vector<MetricsReport>& reports);

} // namespace merge
