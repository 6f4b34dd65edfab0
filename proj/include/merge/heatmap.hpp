#pragma once

#include "merge/ingest.hpp"
#include "merge/matrix.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace merge {

struct HeatmapFiles {
    std::filesystem::path table; ///< <prefix>.tsv
    std::filesystem::path image; ///< <prefix>.ppm
    double pcc = 0.0;
};

/// Writes per-spot (grid_row, grid_col, truth, pred) for one gene and a
/// side-by-side truth|prediction raster (binary PPM) whose header comments
/// carry the gene name and its PCC.
HeatmapFiles heatmap_export(const STSample& sample, const std::string& gene, const Matrix& pred,
                            const Matrix& truth, const std::filesystem::path& prefix);

struct HeatmapRow {
    int grid_row = 0;
    int grid_col = 0;
    double truth = 0.0;
    double pred = 0.0;

    friend bool operator==(const HeatmapRow&, const HeatmapRow&) = default;
};

std::vector<HeatmapRow> read_heatmap_table(const std::filesystem::path& path);

} // namespace merge
