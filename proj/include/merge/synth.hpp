#pragma once

#include "merge/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace merge {

/// Synthetic slide with planted morphological regions.
struct SynthSpec {
    int grid_rows = 20;
    int grid_cols = 20;
    int n_regions = 4;
    int genes_per_region = 5;
    int embedding_dim = 32;
    double noise_sigma = 0.3;  ///< additive Gaussian noise on expression
    double dropout_rate = 0.0; ///< probability an entry is zeroed
    std::uint64_t seed = 3927;

    /// Shared across a dataset: fixes the region prototypes in embedding space.
    std::uint64_t prototype_seed = 0;
    double embedding_signal = 1.0; ///< prototype scale
    double embedding_noise = 0.5;  ///< per-spot isotropic noise
    double batch_shift = 0.0;      ///< per-slide random offset of all embeddings
    double base_level = 0.2;       ///< expression away from a gene's region
    double signature_level = 1.0;  ///< added on a region's signature genes

    void validate() const;
};

struct SynthSample {
    STSample sample;
    EmbeddingMatrix embeddings;
    std::vector<int> region_labels; ///< per spot
    int split_region = -1;          ///< region made of two disconnected islands (-1 if none)
};

/// Territories grow by round-robin BFS from seeded cells. One extra
/// territory is merged into a region it does not touch, so that region
/// becomes two disconnected islands (needs n_regions >= 2).
SynthSample generate(const SynthSpec& spec, const std::string& sample_id = "synth");

/// Writes <dir>/<id>.spots.tsv, .expr.tsv, .emb.tsv and .labels.tsv.
void write_synth(const std::filesystem::path& dir, const SynthSample& s);

} // namespace merge
