#pragma once

// Spot tables, expression matrices and patch embeddings.
//
// File layout (tab separated, one header row):
//   spots       spot_id grid_row grid_col pixel_x pixel_y
//   expression  spot_id <gene_1> ... <gene_m>
//   embeddings  spot_id <d numeric columns>
// Rows of the expression and embedding files are matched to spots by
// spot_id, never by position.

#include "merge/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace merge {

struct SpotRecord {
    std::string spot_id;
    int grid_row = 0;
    int grid_col = 0;
    double pixel_x = 0.0;
    double pixel_y = 0.0;

    friend bool operator==(const SpotRecord&, const SpotRecord&) = default;
};

/// One slide. Immutable once validated.
struct STSample {
    std::string sample_id;
    std::vector<SpotRecord> spots;
    std::vector<std::string> genes;
    Matrix expr_raw;                     ///< n x m, finite, >= 0
    std::optional<Matrix> expr_smoothed; ///< n x m when present
    bool square_grid = true;

    std::size_t n_spots() const noexcept { return spots.size(); }
    std::size_t n_genes() const noexcept { return genes.size(); }
    /// Index of a gene in the panel, or nullopt.
    std::optional<std::size_t> gene_index(const std::string& name) const;
};

struct EmbeddingMatrix {
    std::string sample_id;
    Matrix data; ///< n x d

    std::size_t dim() const noexcept { return data.cols(); }
};

/// Throws merge::Error describing the first violated invariant.
void validate(const STSample& sample);

STSample load_sample(const std::filesystem::path& spots_path,
                     const std::filesystem::path& expr_path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const STSample& sample);

void save_spots(const std::filesystem::path& path, const STSample& sample);
void save_expression(const std::filesystem::path& path, const STSample& sample,
                     const Matrix& expr);
void save_embeddings(const std::filesystem::path& path, const STSample& sample,
                     const EmbeddingMatrix& emb);

/// Sample id derived from a spots file name: "<id>.spots.tsv" -> "<id>".
std::string sample_id_from_path(const std::filesystem::path& spots_path);

/// Lookup from grid coordinates to spot index.
class GridIndex {
public:
    explicit GridIndex(const STSample& sample);
    std::optional<std::size_t> find(int row, int col) const;

private:
    static std::uint64_t key(int row, int col) noexcept {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(row)) << 32) |
               static_cast<std::uint32_t>(col);
    }
    std::unordered_map<std::uint64_t, std::size_t> cells_;
};

/// Spots at Chebyshev grid distance 1, in ascending index order.
std::vector<std::size_t> eight_neighbors(const STSample& sample, std::size_t spot_index);
std::vector<std::size_t> eight_neighbors(const STSample& sample, const GridIndex& grid,
                                         std::size_t spot_index);

} // namespace merge
