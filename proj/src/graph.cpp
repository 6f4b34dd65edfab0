#include "merge/graph.hpp"

#include "merge/error.hpp"
#include "merge/tsv.hpp"

#include <algorithm>
#include <deque>

namespace merge {

namespace {

Edge make_edge(std::size_t a, std::size_t b, EdgeKind kind) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return {lo, hi, kind};
}

std::vector<std::vector<std::uint32_t>> adjacency(const HierGraph& g, KindMask kinds) {
    std::vector<std::vector<std::uint32_t>> adj(g.n_nodes);
    for (const auto& [lo, hi] : message_pairs(g, kinds)) {
        adj[lo].push_back(hi);
        adj[hi].push_back(lo);
    }
    return adj;
}

} // namespace

std::string_view edge_kind_name(EdgeKind k) noexcept {
    switch (k) {
    case EdgeKind::internal_spatial: return "internal_spatial";
    case EdgeKind::internal_feature: return "internal_feature";
    case EdgeKind::shortcut: return "shortcut";
    case EdgeKind::one_hop: return "one_hop";
    }
    return "unknown";
}

EdgeKind parse_edge_kind(std::string_view name) {
    for (auto k : {EdgeKind::internal_spatial, EdgeKind::internal_feature, EdgeKind::shortcut, EdgeKind::one_hop})
        if (edge_kind_name(k) == name) return k;
    throw Error("unknown edge kind '" + std::string(name) + "'");
}

std::size_t HierGraph::count(EdgeKind k) const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [k](const Edge& e) { return e.kind == k; }));
}

std::vector<Edge> build_internal_edges(const ClusterModel& cm) {
    const EdgeKind kind = cm.kind == ClusterKind::spatial ? EdgeKind::internal_spatial : EdgeKind::internal_feature;
    std::vector<Edge> out;
    for (std::size_t i = 0; i < cm.assignments.size(); ++i) {
        const std::size_t centroid = cm.centroid_spot[static_cast<std::size_t>(cm.assignments[i])];
        if (centroid != i) out.push_back(make_edge(i, centroid, kind));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Edge> build_shortcut_edges(const ClusterModel& spatial, const ClusterModel& feature) {
    std::vector<std::size_t> hubs(spatial.centroid_spot);
    hubs.insert(hubs.end(), feature.centroid_spot.begin(), feature.centroid_spot.end());
    std::sort(hubs.begin(), hubs.end());
    hubs.erase(std::unique(hubs.begin(), hubs.end()), hubs.end());
    std::vector<Edge> out;
    if (hubs.size() > 1) out.reserve(hubs.size() * (hubs.size() - 1) / 2);
    for (std::size_t a = 0; a < hubs.size(); ++a)
        for (std::size_t b = a + 1; b < hubs.size(); ++b) out.push_back(make_edge(hubs[a], hubs[b], EdgeKind::shortcut));
    return out;
}

std::vector<Edge> build_one_hop_edges(const STSample& sample) {
    const GridIndex grid(sample);
    std::vector<Edge> out;
    for (std::size_t i = 0; i < sample.n_spots(); ++i)
        for (std::size_t j : eight_neighbors(sample, grid, i))
            if (i < j) out.push_back(make_edge(i, j, EdgeKind::one_hop));
    std::sort(out.begin(), out.end());
    return out;
}

HierGraph assemble(const STSample& sample, const ClusterModel& spatial, const ClusterModel& feature) {
    if (spatial.kind != ClusterKind::spatial || feature.kind != ClusterKind::feature)
        throw Error("assemble: expected one spatial and one feature cluster model");
    const std::size_t n = sample.n_spots();
    validate(spatial, n);
    validate(feature, n);
    HierGraph g;
    g.n_nodes = n;
    for (auto&& part : {build_internal_edges(spatial), build_internal_edges(feature),
                        build_shortcut_edges(spatial, feature), build_one_hop_edges(sample)})
        g.edges.insert(g.edges.end(), part.begin(), part.end());
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    validate(g, &spatial, &feature);
    return g;
}

HierGraph assemble_one_hop(const STSample& sample) {
    HierGraph g;
    g.n_nodes = sample.n_spots();
    g.edges = build_one_hop_edges(sample);
    validate(g);
    return g;
}

void validate(const HierGraph& g, const ClusterModel* spatial, const ClusterModel* feature) {
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& edge = g.edges[e];
        if (edge.src == edge.dst) throw Error("graph invariant violated: self-loop at node " + std::to_string(edge.src));
        if (edge.src > edge.dst) throw Error("graph invariant violated: edge not stored as (min, max)");
        if (edge.dst >= g.n_nodes) throw Error("graph invariant violated: node index out of range");
        if (e > 0 && !(g.edges[e - 1] < edge))
            throw Error("graph invariant violated: duplicate or unsorted (min, max, kind) triple");
    }
    if (!spatial || !feature) return;

    const std::size_t n = g.n_nodes;
    std::vector<int> internal_s(n, 0), internal_f(n, 0);
    std::vector<bool> is_centroid_s(n, false), is_centroid_f(n, false);
    for (auto c : spatial->centroid_spot) is_centroid_s[c] = true;
    for (auto c : feature->centroid_spot) is_centroid_f[c] = true;
    for (const auto& e : g.edges) {
        if (e.kind == EdgeKind::internal_spatial) {
            ++internal_s[e.src];
            ++internal_s[e.dst];
        } else if (e.kind == EdgeKind::internal_feature) {
            ++internal_f[e.src];
            ++internal_f[e.dst];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_centroid_s[i] && internal_s[i] != 1)
            throw Error("graph invariant violated: node " + std::to_string(i) +
                        " must have exactly one internal_spatial edge");
        if (!is_centroid_f[i] && internal_f[i] != 1)
            throw Error("graph invariant violated: node " + std::to_string(i) +
                        " must have exactly one internal_feature edge");
    }

    std::vector<std::size_t> hubs(spatial->centroid_spot);
    hubs.insert(hubs.end(), feature->centroid_spot.begin(), feature->centroid_spot.end());
    std::sort(hubs.begin(), hubs.end());
    hubs.erase(std::unique(hubs.begin(), hubs.end()), hubs.end());
    if (g.count(EdgeKind::shortcut) != hubs.size() * (hubs.size() - 1) / 2)
        throw Error("graph invariant violated: shortcut edges must form a complete graph on the centroid set");

    const auto diameter = max_hop_distance(
        g, KindMask::of({EdgeKind::internal_spatial, EdgeKind::internal_feature, EdgeKind::shortcut}));
    if (diameter == kUnreachable || diameter > 3)
        throw Error("graph invariant violated: internal+shortcut hop distance exceeds 3");
}

std::size_t max_hop_distance(const HierGraph& g, KindMask kinds) {
    const auto adj = adjacency(g, kinds);
    std::size_t worst = 0;
    std::vector<std::size_t> dist(g.n_nodes);
    std::deque<std::uint32_t> queue;
    for (std::size_t s = 0; s < g.n_nodes; ++s) {
        std::fill(dist.begin(), dist.end(), kUnreachable);
        dist[s] = 0;
        queue.assign(1, static_cast<std::uint32_t>(s));
        std::size_t reached = 1;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto v : adj[u])
                if (dist[v] == kUnreachable) {
                    dist[v] = dist[u] + 1;
                    worst = std::max(worst, dist[v]);
                    ++reached;
                    queue.push_back(v);
                }
        }
        if (reached != g.n_nodes) return kUnreachable;
    }
    return worst;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> message_pairs(const HierGraph& g, KindMask kinds) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(g.edges.size());
    for (const auto& e : g.edges)
        if (kinds.has(e.kind)) out.emplace_back(e.src, e.dst);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void export_edges(const std::filesystem::path& path, const HierGraph& g) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(g.edges.size());
    for (const auto& e : g.edges)
        rows.push_back({std::to_string(e.src), std::to_string(e.dst), std::string(edge_kind_name(e.kind))});
    tsv::write(path, {"src", "dst", "kind"}, rows);
}

HierGraph import_edges(const std::filesystem::path& path, std::size_t n_nodes) {
    const auto t = tsv::read(path);
    if (t.header != std::vector<std::string>{"src", "dst", "kind"})
        throw Error(path.string() + ": expected header 'src dst kind'");
    HierGraph g;
    g.n_nodes = n_nodes;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto where = path.string() + ":" + std::to_string(t.line_numbers[r]);
        const auto a = tsv::parse_int(t.rows[r][0], where);
        const auto b = tsv::parse_int(t.rows[r][1], where);
        if (a < 0 || b < 0) throw Error(where + ": negative node index");
        g.edges.push_back(make_edge(static_cast<std::size_t>(a), static_cast<std::size_t>(b), parse_edge_kind(t.rows[r][2])));
    }
    std::sort(g.edges.begin(), g.edges.end());
    validate(g);
    return g;
}

} // namespace merge
