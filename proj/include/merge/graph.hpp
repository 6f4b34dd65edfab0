#pragma once

#include "merge/clustering.hpp"
#include "merge/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace merge {

enum class EdgeKind : std::uint8_t { internal_spatial = 0, internal_feature = 1, shortcut = 2, one_hop = 3 };

std::string_view edge_kind_name(EdgeKind k) noexcept;
EdgeKind parse_edge_kind(std::string_view name);

/// Bit set over EdgeKind.
struct KindMask {
    std::uint8_t bits = 0;

    static constexpr KindMask all() { return {0x0f}; }
    static constexpr KindMask of(std::initializer_list<EdgeKind> kinds) {
        KindMask m;
        for (auto k : kinds) m.bits |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
        return m;
    }
    constexpr bool has(EdgeKind k) const { return bits & (1u << static_cast<unsigned>(k)); }
};

/// Undirected typed edge, stored with src < dst.
struct Edge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    EdgeKind kind = EdgeKind::one_hop;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct HierGraph {
    std::size_t n_nodes = 0;
    std::vector<Edge> edges; ///< sorted by (src, dst, kind)

    std::size_t count(EdgeKind k) const;
};

std::vector<Edge> build_internal_edges(const ClusterModel& cm);
std::vector<Edge> build_shortcut_edges(const ClusterModel& spatial, const ClusterModel& feature);
std::vector<Edge> build_one_hop_edges(const STSample& sample);

/// Union of all four edge families; validates every structural invariant.
HierGraph assemble(const STSample& sample, const ClusterModel& spatial, const ClusterModel& feature);
/// Grid adjacency only (the 1-hop baseline graph).
HierGraph assemble_one_hop(const STSample& sample);

/// Checks the generic invariants (edge ordering, no self-loops, no duplicate
/// triples) and, when cluster models are given, the hierarchical ones.
void validate(const HierGraph& g, const ClusterModel* spatial = nullptr,
              const ClusterModel* feature = nullptr);

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Maximum all-pairs BFS hop distance using only edges of the given kinds;
/// kUnreachable if the induced graph is disconnected.
std::size_t max_hop_distance(const HierGraph& g, KindMask kinds);

/// Distinct unordered node pairs across the selected kinds, sorted. This is
/// the logical edge set used for message passing and edge dropout.
std::vector<std::pair<std::uint32_t, std::uint32_t>> message_pairs(const HierGraph& g,
                                                                    KindMask kinds = KindMask::all());

void export_edges(const std::filesystem::path& path, const HierGraph& g);
HierGraph import_edges(const std::filesystem::path& path, std::size_t n_nodes);

} // namespace merge
