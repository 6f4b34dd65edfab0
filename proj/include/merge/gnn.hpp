#pragma once

// Four-layer graph attention network with multi-head attention, layer
// normalisation between layers and edge dropout, plus exact reverse-mode
// gradients of the MSE objective.
//
// Per head h and destination node i (self-loop always present):
//   z_j      = x_j W_h
//   e(i<-j)  = LeakyReLU_0.2(a_src_h . z_j + a_dst_h . z_i)
//   alpha    = softmax over j in N(i) u {i}
//   out_i    = sum_j alpha(i<-j) z_j
// Hidden layers concatenate heads, then ELU, then LayerNorm. The last layer
// averages its heads and is linear.

#include "merge/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace merge {

struct GatLayerParams {
    int heads = 1;
    int head_dim = 1;
    bool final = false;
    Matrix weight;   ///< in_dim x heads*head_dim
    Matrix attn_src; ///< heads x head_dim
    Matrix attn_dst; ///< heads x head_dim
    std::vector<double> ln_scale; ///< heads*head_dim; empty on the final layer
    std::vector<double> ln_shift;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept {
        return final ? static_cast<std::size_t>(head_dim) : static_cast<std::size_t>(heads * head_dim);
    }
    friend bool operator==(const GatLayerParams&, const GatLayerParams&) = default;
};

struct GatArchitecture {
    int in_dim = 256;
    int out_dim = 250;
    int hidden_heads = 8;
    int head_dim = 32;
    int final_heads = 1;
    int layers = 4;
    double edge_dropout = 0.2;
};

struct GatModel {
    std::vector<GatLayerParams> layers;
    double edge_dropout_p = 0.2;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    /// Glorot-uniform weights and attention vectors, unit LayerNorm scale.
    static GatModel init(const GatArchitecture& arch, std::uint64_t seed);
    /// Same shapes, all entries zero.
    GatModel zeros_like() const;

    /// Every parameter block, in a fixed order.
    std::vector<std::span<double>> parameters();
    std::vector<std::span<const double>> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::size_t parameter_count() const;

    /// Throws merge::Error if dimensions do not compose or values are non-finite.
    void validate() const;

    friend bool operator==(const GatModel&, const GatModel&) = default;
};

/// Destination-major adjacency with self-loops. sources[offsets[i]..offsets[i+1])
/// are the in-neighbours of i (ascending, i included).
struct MessageGraph {
    std::size_t n_nodes = 0;
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> sources;

    std::size_t n_edges() const noexcept { return sources.size(); }
};

using NodePair = std::pair<std::uint32_t, std::uint32_t>;

/// Expands undirected pairs into both directions and adds self-loops.
MessageGraph build_message_graph(std::size_t n_nodes, std::span<const NodePair> pairs);

/// Keep mask over logical edges: each pair dropped independently with
/// probability p, driven only by seed.
std::vector<bool> edge_keep_mask(std::size_t n_pairs, double p, std::uint64_t seed);
std::vector<NodePair> apply_mask(std::span<const NodePair> pairs, const std::vector<bool>& keep);

enum class Mode { train, eval };

/// Intermediates of one layer, kept for the backward pass.
struct LayerTrace {
    Matrix input;
    Matrix z;          ///< n x H*F
    Matrix src_score;  ///< n x H
    Matrix dst_score;  ///< n x H
    std::vector<double> raw;   ///< n_edges x H, pre-LeakyReLU
    std::vector<double> alpha; ///< n_edges x H
    Matrix aggregated; ///< n x out (final) or n x H*F
    Matrix normalized; ///< hidden layers: LayerNorm input standardised
    std::vector<double> inv_std;
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
};

Matrix gat_layer_forward(const Matrix& x, const MessageGraph& g, const GatLayerParams& p,
                         LayerTrace* trace = nullptr);

Matrix gat_forward(const GatModel& model, const MessageGraph& g, const Matrix& x,
                   ForwardTrace* trace = nullptr);

/// Applies edge dropout in train mode (seeded), none in eval mode.
Matrix gat_forward(const GatModel& model, std::span<const NodePair> pairs, std::size_t n_nodes,
                   const Matrix& x, Mode mode, std::uint64_t seed);

struct LossGrad {
    double loss = 0.0;
    Matrix grad; ///< d loss / d pred
};

/// Mean squared error over all entries and its gradient 2(pred-target)/(n*m).
LossGrad mse_loss(const Matrix& pred, const Matrix& target);

struct Gradients {
    double loss = 0.0;
    Matrix prediction;
    GatModel grads; ///< same layout as the model
};

/// Reverse-mode gradients of mse_loss(gat_forward(...), y) on a fixed graph.
Gradients backward(const GatModel& model, const MessageGraph& g, const Matrix& x, const Matrix& y);

/// As above, with the dropout mask drawn from seed in train mode.
Gradients backward(const GatModel& model, std::span<const NodePair> pairs, std::size_t n_nodes,
                   const Matrix& x, const Matrix& y, Mode mode, std::uint64_t seed);

/// Text checkpoint: every matrix with a shape header, values as hex floats.
void save_checkpoint(const std::filesystem::path& path, const GatModel& model);
GatModel load_checkpoint(const std::filesystem::path& path);

} // namespace merge
