#include "merge/synth.hpp"

#include "merge/error.hpp"
#include "merge/seed.hpp"
#include "merge/tsv.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>

namespace merge {

void SynthSpec::validate() const {
    if (grid_rows < 1 || grid_cols < 1) throw Error("synth: grid dimensions must be >= 1");
    if (n_regions < 1) throw Error("synth: n_regions must be >= 1");
    if (genes_per_region < 1) throw Error("synth: genes_per_region must be >= 1");
    if (embedding_dim < n_regions) throw Error("synth: embedding_dim must be >= n_regions for orthogonal prototypes");
    if (!(noise_sigma >= 0.0)) throw Error("synth: noise_sigma must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("synth: dropout_rate must lie in [0, 1)");
    const int territories = n_regions + (n_regions >= 2 ? 1 : 0);
    if (territories > grid_rows * grid_cols)
        throw Error("synth: infeasible spec: more regions than spots");
}

namespace {

/// Orthonormal columns (d x r) via Gram-Schmidt on Gaussian draws.
std::vector<std::vector<double>> orthogonal_prototypes(int d, int r, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed({seed, 0x9e07}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> out;
    while (static_cast<int>(out.size()) < r) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (double& x : v) x = normal(rng);
        for (const auto& u : out) {
            double proj = 0.0;
            for (int k = 0; k < d; ++k) proj += v[k] * u[k];
            for (int k = 0; k < d; ++k) v[k] -= proj * u[k];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

/// Round-robin BFS (4-connectivity) from the given seed cells.
std::vector<int> grow_territories(int rows, int cols, const std::vector<int>& seeds, std::mt19937_64& rng) {
    std::vector<int> owner(static_cast<std::size_t>(rows * cols), -1);
    std::vector<std::deque<int>> frontier(seeds.size());
    for (std::size_t t = 0; t < seeds.size(); ++t) {
        owner[static_cast<std::size_t>(seeds[t])] = static_cast<int>(t);
        frontier[t].push_back(seeds[t]);
    }
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    bool active = true;
    while (active) {
        active = false;
        for (std::size_t t = 0; t < seeds.size(); ++t) {
            if (frontier[t].empty()) continue;
            active = true;
            // Pop a random frontier cell so territories are irregular.
            const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(frontier[t].size()));
            std::swap(frontier[t][std::min(pick, frontier[t].size() - 1)], frontier[t].front());
            const int cell = frontier[t].front();
            frontier[t].pop_front();
            const int r = cell / cols, c = cell % cols;
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                const int nb = nr * cols + nc;
                if (owner[static_cast<std::size_t>(nb)] != -1) continue;
                owner[static_cast<std::size_t>(nb)] = static_cast<int>(t);
                frontier[t].push_back(nb);
            }
        }
    }
    return owner;
}

/// Territories 8-adjacent to territory `t`.
std::set<int> touching(const std::vector<int>& owner, int rows, int cols, int t) {
    std::set<int> out;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (owner[static_cast<std::size_t>(r * cols + c)] != t) continue;
            for (int a = -1; a <= 1; ++a)
                for (int b = -1; b <= 1; ++b) {
                    const int nr = r + a, nc = c + b;
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    const int o = owner[static_cast<std::size_t>(nr * cols + nc)];
                    if (o != t) out.insert(o);
                }
        }
    return out;
}

} // namespace

SynthSample generate(const SynthSpec& spec, const std::string& sample_id) {
    spec.validate();
    const int rows = spec.grid_rows, cols = spec.grid_cols;
    const int cells = rows * cols;
    const bool split = spec.n_regions >= 2;
    const int territories = spec.n_regions + (split ? 1 : 0);
    std::mt19937_64 layout_rng(derive_seed({spec.seed, 0x1a7}));

    std::vector<int> labels;
    int split_region = -1;
    for (int attempt = 0; attempt < 200 && labels.empty(); ++attempt) {
        std::vector<int> seeds;
        while (static_cast<int>(seeds.size()) < territories - (split ? 1 : 0)) {
            const int cell = std::min(cells - 1, static_cast<int>(uniform01(layout_rng) * cells));
            if (std::find(seeds.begin(), seeds.end(), cell) == seeds.end()) seeds.push_back(cell);
        }
        if (split) {
            // The island starts as far as possible from region 0's seed.
            const int r0 = seeds[0] / cols, c0 = seeds[0] % cols;
            int best = -1, best_d = -1;
            for (int cell = 0; cell < cells; ++cell) {
                if (std::find(seeds.begin(), seeds.end(), cell) != seeds.end()) continue;
                const int d = std::abs(cell / cols - r0) + std::abs(cell % cols - c0);
                if (d > best_d) {
                    best_d = d;
                    best = cell;
                }
            }
            seeds.push_back(best);
        }
        auto owner = grow_territories(rows, cols, seeds, layout_rng);
        if (!split) {
            labels = std::move(owner);
            break;
        }
        const int island = spec.n_regions;
        const auto near = touching(owner, rows, cols, island);
        for (int r = 0; r < spec.n_regions; ++r)
            if (!near.count(r)) {
                split_region = r;
                break;
            }
        if (split_region < 0) continue;
        for (int& o : owner)
            if (o == island) o = split_region;
        labels = std::move(owner);
    }
    if (labels.empty()) throw Error("synth: infeasible spec: cannot place a disconnected island on this grid");

    SynthSample out;
    out.split_region = split_region;
    out.region_labels = labels;
    auto& s = out.sample;
    s.sample_id = sample_id;
    s.spots.reserve(static_cast<std::size_t>(cells));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            s.spots.push_back({"spot_r" + std::to_string(r) + "_c" + std::to_string(c), r, c, 100.0 * c + 50.0,
                               100.0 * r + 50.0});
    const int m = spec.n_regions * spec.genes_per_region;
    for (int r = 0; r < spec.n_regions; ++r)
        for (int k = 0; k < spec.genes_per_region; ++k)
            s.genes.push_back("R" + std::to_string(r) + "_G" + std::to_string(k));

    std::mt19937_64 expr_rng(derive_seed({spec.seed, 0xe4a}));
    std::mt19937_64 drop_rng(derive_seed({spec.seed, 0xd40}));
    std::normal_distribution<double> normal(0.0, 1.0);
    s.expr_raw = Matrix(static_cast<std::size_t>(cells), static_cast<std::size_t>(m));
    for (int i = 0; i < cells; ++i)
        for (int g = 0; g < m; ++g) {
            const bool signature = g / spec.genes_per_region == labels[static_cast<std::size_t>(i)];
            double v = spec.base_level + (signature ? spec.signature_level : 0.0) + spec.noise_sigma * normal(expr_rng);
            v = std::max(0.0, v);
            if (uniform01(drop_rng) < spec.dropout_rate) v = 0.0;
            s.expr_raw(static_cast<std::size_t>(i), static_cast<std::size_t>(g)) = v;
        }

    const auto protos = orthogonal_prototypes(spec.embedding_dim, spec.n_regions, spec.prototype_seed);
    std::mt19937_64 emb_rng(derive_seed({spec.seed, 0xe3b}));
    const auto d = static_cast<std::size_t>(spec.embedding_dim);
    std::vector<double> shift(d);
    for (double& v : shift) v = spec.batch_shift * normal(emb_rng);
    out.embeddings.sample_id = sample_id;
    out.embeddings.data = Matrix(static_cast<std::size_t>(cells), d);
    for (int i = 0; i < cells; ++i) {
        const auto& proto = protos[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        for (std::size_t k = 0; k < d; ++k)
            out.embeddings.data(static_cast<std::size_t>(i), k) =
                spec.embedding_signal * proto[k] + shift[k] + spec.embedding_noise * normal(emb_rng);
    }
    validate(s);
    return out;
}

void write_synth(const std::filesystem::path& dir, const SynthSample& s) {
    const auto& id = s.sample.sample_id;
    save_spots(dir / (id + ".spots.tsv"), s.sample);
    save_expression(dir / (id + ".expr.tsv"), s.sample, s.sample.expr_raw);
    save_embeddings(dir / (id + ".emb.tsv"), s.sample, s.embeddings);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < s.region_labels.size(); ++i)
        rows.push_back({s.sample.spots[i].spot_id, std::to_string(s.region_labels[i])});
    tsv::write(dir / (id + ".labels.tsv"), {"spot_id", "region"}, rows);
}

} // namespace merge
