#include "doctest.h"
#include "test_util.hpp"

#include "merge/clustering.hpp"
#include "merge/error.hpp"
#include "merge/ingest.hpp"
#include "merge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

using namespace merge;

namespace {

/// Number of 4-connected components of one region's cells.
int components(const SynthSample& s, int region, int rows, int cols) {
    std::vector<int> seen(s.region_labels.size(), 0);
    int count = 0;
    for (std::size_t start = 0; start < seen.size(); ++start) {
        if (seen[start] || s.region_labels[start] != region) continue;
        ++count;
        std::queue<std::size_t> q;
        q.push(start);
        seen[start] = 1;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            const int r = static_cast<int>(u) / cols, c = static_cast<int>(u) % cols;
            const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                const auto v = static_cast<std::size_t>(nr * cols + nc);
                if (!seen[v] && s.region_labels[v] == region) {
                    seen[v] = 1;
                    q.push(v);
                }
            }
        }
    }
    return count;
}

} // namespace

TEST_CASE("signature genes carry the planted mean") {
    SynthSpec spec;
    spec.noise_sigma = 0.1;
    spec.base_level = 0.5;
    const auto s = generate(spec);
    const std::size_t m = static_cast<std::size_t>(spec.n_regions * spec.genes_per_region);
    REQUIRE(s.sample.n_genes() == m);
    REQUIRE(s.sample.n_spots() == 400);
    std::vector<double> on(m, 0.0), off(m, 0.0);
    std::vector<int> n_on(m, 0), n_off(m, 0);
    for (std::size_t i = 0; i < 400; ++i)
        for (std::size_t g = 0; g < m; ++g) {
            const bool sig = static_cast<int>(g) / spec.genes_per_region == s.region_labels[i];
            (sig ? on : off)[g] += s.sample.expr_raw(i, g);
            ++(sig ? n_on : n_off)[g];
        }
    for (std::size_t g = 0; g < m; ++g) {
        CHECK(on[g] / n_on[g] == doctest::Approx(1.5).epsilon(0.02));
        CHECK(off[g] / n_off[g] == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("dropout zeroes the requested fraction") {
    SynthSpec spec;
    spec.dropout_rate = 0.5;
    spec.base_level = 5.0;
    const auto s = generate(spec);
    const auto vals = s.sample.expr_raw.values();
    const double zeros = static_cast<double>(std::count(vals.begin(), vals.end(), 0.0));
    CHECK(std::fabs(zeros / static_cast<double>(vals.size()) - 0.5) <= 0.05);
}

TEST_CASE("generation is deterministic per seed") {
    SynthSpec spec;
    const auto a = generate(spec, "x"), b = generate(spec, "x");
    CHECK(a.sample.expr_raw == b.sample.expr_raw);
    CHECK(a.embeddings.data == b.embeddings.data);
    CHECK(a.region_labels == b.region_labels);
    spec.seed = 1;
    CHECK_FALSE(generate(spec, "x").sample.expr_raw == a.sample.expr_raw);
}

TEST_CASE("noiseless embeddings let k-means recover the regions exactly") {
    SynthSpec spec;
    spec.embedding_noise = 0.0;
    spec.noise_sigma = 0.0;
    const auto s = generate(spec);
    const auto km = kmeans(s.embeddings.data, spec.n_regions, 3927);
    CHECK(adjusted_rand_index(km.assignments, s.region_labels) == doctest::Approx(1.0));
}

TEST_CASE("the split region forms two disconnected islands") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthSpec spec;
        spec.seed = seed;
        const auto s = generate(spec);
        REQUIRE(s.split_region >= 0);
        CHECK(components(s, s.split_region, spec.grid_rows, spec.grid_cols) == 2);
        for (int r = 0; r < spec.n_regions; ++r)
            if (r != s.split_region) CHECK(components(s, r, spec.grid_rows, spec.grid_cols) == 1);
        // No 8-neighbour pair straddles the two islands: islands are at Chebyshev distance >= 2.
        std::set<int> labels(s.region_labels.begin(), s.region_labels.end());
        CHECK(static_cast<int>(labels.size()) == spec.n_regions);
    }
}

TEST_CASE("spec validation and infeasible layouts") {
    CHECK_THROWS_AS((SynthSpec{.grid_rows = 0}.validate()), Error);
    CHECK_THROWS_AS((SynthSpec{.dropout_rate = 1.0}.validate()), Error);
    CHECK_THROWS_AS((SynthSpec{.embedding_dim = 2}.validate()), Error);
    CHECK_THROWS_AS(generate(SynthSpec{.grid_rows = 2, .grid_cols = 2, .n_regions = 4}), Error);
}

TEST_CASE("written files load back through ingest") {
    SynthSpec spec;
    spec.grid_rows = 6;
    spec.grid_cols = 7;
    spec.dropout_rate = 0.3;
    const auto s = generate(spec, "toy");
    const auto dir = test::tmp_dir("synth_io");
    write_synth(dir, s);
    const auto back = load_sample(dir / "toy.spots.tsv", dir / "toy.expr.tsv");
    CHECK(back.sample_id == "toy");
    CHECK(back.expr_raw == s.sample.expr_raw);
    const auto emb = load_embeddings(dir / "toy.emb.tsv", back);
    CHECK(emb.data == s.embeddings.data);
}
