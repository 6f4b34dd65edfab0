#include "merge/clustering.hpp"

#include "merge/error.hpp"
#include "merge/kernels.hpp"
#include "merge/seed.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace merge {

namespace {

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order) {
    Matrix out(order.size(), x.cols());
    for (std::size_t q = 0; q < order.size(); ++q)
        std::copy_n(x.row(order[q]).data(), x.cols(), out.row(q).data());
    return out;
}

std::uint64_t data_hash(const Matrix& sorted) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(sorted.rows());
    mix(sorted.cols());
    for (double v : sorted.values()) mix(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
    return h;
}

void update_means(const Matrix& x, const std::vector<int>& assign, Matrix& means,
                  std::vector<std::size_t>& counts) {
    const auto& k = simd::active();
    means.fill(0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto a = static_cast<std::size_t>(assign[i]);
        k.axpy(1.0, x.row(i).data(), means.row(a).data(), x.cols());
        ++counts[a];
    }
    for (std::size_t a = 0; a < means.rows(); ++a)
        if (counts[a]) k.scale(1.0 / static_cast<double>(counts[a]), means.row(a).data(), x.cols());
}

double inertia(const Matrix& x, const std::vector<int>& assign, const Matrix& means) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        total += simd::squared_distance(x.row(i), means.row(static_cast<std::size_t>(assign[i])));
    return total;
}

} // namespace

KMeansResult kmeans(const Matrix& points, int c, std::uint64_t seed, int max_iter) {
    const std::size_t n = points.rows();
    if (c < 1 || static_cast<std::size_t>(c) > n)
        throw Error("kmeans: need 1 <= c <= n (c=" + std::to_string(c) + ", n=" + std::to_string(n) + ")");
    if (max_iter < 1) throw Error("kmeans: max_iter must be >= 1");
    const auto cc = static_cast<std::size_t>(c);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ra = points.row(a);
        const auto rb = points.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    const Matrix x = gather_rows(points, order);
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(data_hash(x))));

    // k-means++ seeding.
    Matrix means(cc, x.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    for (std::size_t a = 0; a < cc; ++a) {
        std::size_t pick = first;
        if (a > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += d2[i];
            if (total > 0.0) {
                const double target = uniform01(rng) * total;
                double run = 0.0;
                pick = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (d2[i] <= 0.0) continue;
                    run += d2[i];
                    pick = i;
                    if (run > target) break;
                }
            } else {
                pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
            }
        }
        chosen[pick] = true;
        std::copy_n(x.row(pick).data(), x.cols(), means.row(a).data());
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], simd::squared_distance(x.row(i), means.row(a)));
    }

    KMeansResult r;
    std::vector<int> assign(n, -1);
    std::vector<std::size_t> counts(cc, 0);
    std::vector<double> dist(n, 0.0);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = assign[i];
            double best_d = best >= 0 ? simd::squared_distance(x.row(i), means.row(static_cast<std::size_t>(best)))
                                      : std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < cc; ++a) {
                const double d = simd::squared_distance(x.row(i), means.row(a));
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(a);
                }
            }
            if (best != assign[i]) changed = true;
            assign[i] = best;
        }
        update_means(x, assign, means, counts);

        bool repaired = false;
        for (std::size_t empty = 0; empty < cc; ++empty) {
            if (counts[empty]) continue;
            for (std::size_t i = 0; i < n; ++i)
                dist[i] = simd::squared_distance(x.row(i), means.row(static_cast<std::size_t>(assign[i])));
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(assign[i])] < 2) continue;
                if (far == n || dist[i] > dist[far]) far = i;
            }
            if (far == n) throw Error("kmeans: cannot repair empty cluster");
            --counts[static_cast<std::size_t>(assign[far])];
            assign[far] = static_cast<int>(empty);
            counts[empty] = 1;
            repaired = true;
            update_means(x, assign, means, counts);
        }

        r.inertia_history.push_back(inertia(x, assign, means));
        r.iterations = it + 1;
        if (!changed && !repaired) {
            r.converged = true;
            break;
        }
    }

    std::size_t distinct = 0;
    for (std::size_t a = 0; a < cc; ++a) {
        bool dup = false;
        for (std::size_t b = 0; b < a && !dup; ++b)
            dup = std::equal(means.row(a).begin(), means.row(a).end(), means.row(b).begin());
        if (!dup) ++distinct;
    }
    r.degenerate = distinct < cc;

    r.assignments.assign(n, 0);
    for (std::size_t q = 0; q < n; ++q) r.assignments[order[q]] = assign[q];
    r.means = std::move(means);
    return r;
}

std::vector<std::vector<std::size_t>> ClusterModel::members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < assignments.size(); ++i)
        out[static_cast<std::size_t>(assignments[i])].push_back(i);
    return out;
}

int cluster_count(std::size_t n, int target_cluster_size) {
    if (target_cluster_size < 1) throw Error("cluster size must be >= 1");
    const auto size = static_cast<std::size_t>(target_cluster_size);
    return static_cast<int>(std::max<std::size_t>(1, (n + size - 1) / size));
}

std::size_t select_centroid_spot(std::span<const std::size_t> members, const EmbeddingMatrix& emb) {
    if (members.empty()) throw Error("select_centroid_spot: empty cluster");
    std::vector<std::size_t> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> mean(emb.dim(), 0.0);
    const auto& k = simd::active();
    for (std::size_t i : sorted) k.axpy(1.0, emb.data.row(i).data(), mean.data(), mean.size());
    k.scale(1.0 / static_cast<double>(sorted.size()), mean.data(), mean.size());
    std::size_t best = sorted.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i : sorted) {
        const double d = simd::squared_distance(emb.data.row(i), mean);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace {

ClusterModel finish(ClusterKind kind, KMeansResult km, int c, int size, const EmbeddingMatrix& emb) {
    ClusterModel m;
    m.kind = kind;
    m.assignments = std::move(km.assignments);
    m.c = c;
    m.target_cluster_size = size;
    m.degenerate = km.degenerate;
    for (const auto& members : m.members()) m.centroid_spot.push_back(select_centroid_spot(members, emb));
    validate(m, m.assignments.size());
    return m;
}

} // namespace

ClusterModel cluster_spatial(const STSample& sample, const EmbeddingMatrix& emb,
                             int target_cluster_size, std::uint64_t seed) {
    const std::size_t n = sample.n_spots();
    if (emb.data.rows() != n) throw Error("cluster_spatial: embedding rows differ from spot count");
    if (n == 0) throw Error("cluster_spatial: empty sample");
    Matrix coords(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        coords(i, 0) = sample.spots[i].grid_row;
        coords(i, 1) = sample.spots[i].grid_col;
    }
    const int c = cluster_count(n, target_cluster_size);
    return finish(ClusterKind::spatial, kmeans(coords, c, seed), c, target_cluster_size, emb);
}

ClusterModel cluster_feature(const EmbeddingMatrix& emb, int target_cluster_size, std::uint64_t seed) {
    const std::size_t n = emb.data.rows();
    if (n == 0) throw Error("cluster_feature: empty embedding matrix");
    const int c = cluster_count(n, target_cluster_size);
    return finish(ClusterKind::feature, kmeans(emb.data, c, seed), c, target_cluster_size, emb);
}

void validate(const ClusterModel& m, std::size_t n) {
    if (m.assignments.size() != n) throw Error("cluster model: assignment length differs from spot count");
    if (m.c < 1) throw Error("cluster model: c must be >= 1");
    if (m.centroid_spot.size() != static_cast<std::size_t>(m.c))
        throw Error("cluster model: one centroid spot per cluster required");
    std::vector<std::size_t> counts(static_cast<std::size_t>(m.c), 0);
    for (int a : m.assignments) {
        if (a < 0 || a >= m.c) throw Error("cluster model: cluster id out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (!counts[k]) throw Error("cluster model: cluster " + std::to_string(k) + " is empty");
        const auto centroid = m.centroid_spot[k];
        if (centroid >= n || m.assignments[centroid] != static_cast<int>(k))
            throw Error("cluster model: centroid spot of cluster " + std::to_string(k) + " is not a member");
    }
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: label vectors differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto pairs = [](double v) { return v * (v - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : joint) index += pairs(v);
    for (const auto& [key, v] : ra) sa += pairs(v);
    for (const auto& [key, v] : rb) sb += pairs(v);
    const double expected = sa * sb / pairs(static_cast<double>(n));
    const double maximum = 0.5 * (sa + sb);
    if (maximum == expected) return 1.0;
    return (index - expected) / (maximum - expected);
}

} // namespace merge
