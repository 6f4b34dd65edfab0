#include "doctest.h"
#include "test_util.hpp"

#include "merge/error.hpp"
#include "merge/log.hpp"
#include "merge/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace merge;

namespace {

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

double direct_pcc(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

/// Direct evaluation of the two-factor formula, O(n^2), no grid index.
Matrix spcs_oracle(const STSample& s, const Matrix& y, const SpcsParams& p) {
    const std::size_t n = y.rows(), m = y.cols();
    const std::size_t k = std::min<std::size_t>(p.pca_dim, std::min(n, m));
    const Matrix scores = pca_project(y, k);
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sp(m, 0.0), pat(m, 0.0);
        double ws = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const int d = std::abs(s.spots[i].grid_row - s.spots[j].grid_row) +
                          std::abs(s.spots[i].grid_col - s.spots[j].grid_col);
            if (j == i || d > p.tau_s) continue;
            ws += 1.0 / d;
            for (std::size_t g = 0; g < m; ++g) sp[g] += y(j, g) / d;
        }
        for (std::size_t g = 0; g < m; ++g) sp[g] = ws > 0 ? sp[g] / ws : y(i, g);

        std::vector<std::pair<double, std::size_t>> cand;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) cand.emplace_back(1.0 - direct_pcc(scores.row(i), scores.row(j)), j);
        std::sort(cand.begin(), cand.end());
        cand.resize(std::min<std::size_t>(p.tau_p, cand.size()));
        double wp = 0.0;
        for (auto [d, j] : cand) {
            wp += std::exp(-d);
            for (std::size_t g = 0; g < m; ++g) pat[g] += std::exp(-d) * y(j, g);
        }
        for (std::size_t g = 0; g < m; ++g) {
            pat[g] = wp > 0 ? pat[g] / wp : y(i, g);
            out(i, g) = (1 - p.alpha) * y(i, g) + p.alpha * (p.beta * sp[g] + (1 - p.beta) * pat[g]);
        }
    }
    return out;
}

double column_variance(const Matrix& x, std::size_t g) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, g);
    mean /= static_cast<double>(x.rows());
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) v += (x(i, g) - mean) * (x(i, g) - mean);
    return v / static_cast<double>(x.rows());
}

STSample random_tissue(std::mt19937_64& rng, std::size_t genes, int size = 10) {
    std::vector<std::pair<int, int>> coords;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            if (rng() % 5 != 0) coords.emplace_back(r, c);
    auto expr = test::random_matrix(coords.size(), genes, rng, 0.0, 20.0);
    for (double& v : expr.values())
        if (rng() % 3 == 0) v = 0.0;
    return test::coords_sample(coords, expr);
}

} // namespace

TEST_CASE("logcpm examples") {
    Matrix x(3, 2);
    x(0, 0) = 1;
    x(2, 0) = 2;
    x(2, 1) = 2;
    const auto y = logcpm(x);
    CHECK(y(0, 0) == doctest::Approx(std::log(1 + 1e6)).epsilon(1e-15));
    CHECK(y(0, 1) == 0.0);
    CHECK(y(1, 0) == 0.0);
    CHECK(y(1, 1) == 0.0);
    CHECK(y(2, 0) == doctest::Approx(std::log(1 + 5e5)).epsilon(1e-15));
    CHECK(y(2, 0) == y(2, 1));
}

TEST_CASE("smooth_8n on a constant field is the identity") {
    const auto s = test::grid_sample(5, 4, 3, 0.7);
    const auto out = smooth_8n(s);
    for (double v : out.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("smooth_8n matches brute-force neighbourhood averaging on a 3x3 spike") {
    Matrix x(9, 2, 0.0);
    x(4, 0) = 9.0;
    const auto s = test::grid_sample(3, 3, x);
    const auto out = smooth_8n(s);
    // Brute force: average over all spots with Chebyshev distance <= 1.
    for (std::size_t i = 0; i < 9; ++i) {
        double total = 0;
        int count = 0;
        for (std::size_t j = 0; j < 9; ++j)
            if (std::abs(s.spots[i].grid_row - s.spots[j].grid_row) <= 1 &&
                std::abs(s.spots[i].grid_col - s.spots[j].grid_col) <= 1) {
                total += x(j, 0);
                ++count;
            }
        CHECK(out(i, 0) == doctest::Approx(total / count).epsilon(1e-15));
        CHECK(out(i, 1) == 0.0);
    }
    // Frozen from the oracle above: centre 9/9, edges 9/6, corners 9/4.
    CHECK(out(4, 0) == doctest::Approx(1.0));
    CHECK(out(1, 0) == doctest::Approx(1.5));
    CHECK(out(0, 0) == doctest::Approx(2.25));
}

TEST_CASE("smooth_8n never increases per-gene variance") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_tissue(rng, 6);
        const auto out = smooth_8n(s);
        for (std::size_t g = 0; g < 6; ++g)
            CHECK(column_variance(out, g) <= column_variance(s.expr_raw, g) * (1 + 1e-12));
    }
}

TEST_CASE("pca reconstructs rank-1 data from one component") {
    std::mt19937_64 rng(4);
    const auto base = test::random_matrix(1, 6, rng);
    Matrix x(8, 6);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 6; ++j) x(i, j) = (static_cast<double>(i) - 2.5) * base(0, j);
    const auto r = pca(x, 1);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(std::fabs(r.mean[j] + r.scores(i, 0) * r.components(j, 0) - x(i, j)) <= 1e-9);
}

TEST_CASE("pca explained variances match a Jacobi eigen oracle and are non-increasing") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 15 + trial, m = 7;
        const auto x = test::random_matrix(n, m, rng);
        const auto r = pca(x, m);
        std::vector<std::vector<double>> cov(m, std::vector<double>(m, 0.0));
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) {
                for (std::size_t i = 0; i < n; ++i) cov[a][b] += (x(i, a) - r.mean[a]) * (x(i, b) - r.mean[b]);
                cov[a][b] /= static_cast<double>(n - 1);
            }
        const auto ev = jacobi_eigenvalues(cov);
        for (std::size_t c = 0; c < m; ++c) {
            CHECK(r.explained_variance[c] == doctest::Approx(ev[c]).epsilon(1e-10));
            if (c) CHECK(r.explained_variance[c] <= r.explained_variance[c - 1]);
            // Score variance equals the explained variance.
            double v = 0;
            for (std::size_t i = 0; i < n; ++i) v += r.scores(i, c) * r.scores(i, c);
            CHECK(v / static_cast<double>(n - 1) == doctest::Approx(ev[c]).epsilon(1e-9));
        }
    }
}

TEST_CASE("pca gives duplicated rows identical projections and rejects bad k") {
    std::mt19937_64 rng(9);
    auto x = test::random_matrix(10, 5, rng);
    for (std::size_t j = 0; j < 5; ++j) x(7, j) = x(2, j);
    const auto scores = pca_project(x, 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(scores(7, c) == scores(2, c));
    CHECK_THROWS_AS(pca(x, 0), Error);
    CHECK_THROWS_AS(pca(x, 6), Error);
    CHECK_THROWS_AS(pca(Matrix(1, 5), 1), Error);
}

TEST_CASE("pattern_distance examples") {
    log::set_level(log::Level::quiet);
    std::mt19937_64 rng(12);
    auto scores = test::random_matrix(4, 10, rng);
    for (std::size_t j = 0; j < 10; ++j) {
        scores(1, j) = scores(0, j);
        scores(2, j) = -scores(0, j);
        scores(3, j) = 1.5;
    }
    CHECK(pattern_distance(scores, 0, 1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pattern_distance(scores, 0, 2) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(pattern_distance(scores, 0, 3) == 2.0);

    for (int trial = 0; trial < 100; ++trial) {
        const auto r = test::random_matrix(2, 10, rng);
        const double d = pattern_distance(r, 0, 1);
        CHECK(std::fabs(d - (1.0 - direct_pcc(r.row(0), r.row(1)))) <= 1e-12);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
    }
    log::set_level(log::Level::warn);
}

TEST_CASE("SpcsParams defaults and validation") {
    const SpcsParams p;
    CHECK(p.tau_s == 2);
    CHECK(p.tau_p == 16);
    CHECK(p.alpha == 0.6);
    CHECK(p.beta == 0.4);
    CHECK(p.pca_dim == 10);
    CHECK_NOTHROW(p.validate());
    CHECK_THROWS_AS((SpcsParams{.alpha = 1.5}.validate()), Error);
    CHECK_THROWS_AS((SpcsParams{.beta = -0.1}.validate()), Error);
    CHECK_THROWS_AS((SpcsParams{.tau_s = -1}.validate()), Error);
    CHECK_THROWS_AS((SpcsParams{.pca_dim = 0}.validate()), Error);
}

TEST_CASE("spcs with alpha = 0 is the identity on logCPM values") {
    std::mt19937_64 rng(13);
    const auto s = random_tissue(rng, 12);
    SpcsParams p;
    p.alpha = 0.0;
    CHECK(spcs_smooth(s, p) == logcpm(s.expr_raw));
}

TEST_CASE("spcs matches a direct O(n^2) evaluation of the formula") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_tissue(rng, 15, 8);
        SpcsParams p;
        p.tau_s = 1 + trial % 3;
        p.tau_p = 3 + 4 * trial;
        p.beta = 0.2 * trial;
        const auto y = logcpm(s.expr_raw);
        const auto got = spcs_smooth(s, p);
        const auto want = spcs_oracle(s, y, p);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::fabs(got.values()[i] - want.values()[i]) <= 1e-9 * (1 + std::fabs(want.values()[i])));
    }
}

TEST_CASE("spcs leaves a distant identical pair fixed when beta = 0 and tau_p = 1") {
    // Ten spots, one-hot expression on distinct genes except spots 0 and 9,
    // which share gene 0 and sit at opposite corners.
    const std::vector<std::pair<int, int>> coords{{0, 0}, {0, 3}, {0, 6}, {3, 0}, {3, 3},
                                                  {3, 6}, {6, 0}, {6, 3}, {9, 6}, {9, 9}};
    Matrix x(10, 10, 0.0);
    for (std::size_t i = 0; i < 10; ++i) x(i, i == 9 ? 0 : i) = 5.0;
    const auto s = test::coords_sample(coords, x);
    SpcsParams p;
    p.beta = 0.0;
    p.tau_p = 1;
    p.alpha = 0.6;
    const auto y = logcpm(x);
    const auto out = spcs_smooth(s, p);
    for (std::size_t g = 0; g < 10; ++g) {
        CHECK(out(0, g) == doctest::Approx(y(0, g)).epsilon(1e-12));
        CHECK(out(9, g) == doctest::Approx(y(9, g)).epsilon(1e-12));
    }
    const auto oracle = spcs_oracle(s, y, p);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.values()[i] == doctest::Approx(oracle.values()[i]).epsilon(1e-12));
}

TEST_CASE("spcs output stays inside per-gene input envelopes") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_tissue(rng, 8);
        SpcsParams p;
        p.alpha = 0.3 + 0.07 * trial;
        const auto y = logcpm(s.expr_raw);
        const auto out = spcs_smooth(s, p);
        for (std::size_t g = 0; g < y.cols(); ++g) {
            double lo = y(0, g), hi = y(0, g);
            for (std::size_t i = 0; i < y.rows(); ++i) {
                lo = std::min(lo, y(i, g));
                hi = std::max(hi, y(i, g));
            }
            for (std::size_t i = 0; i < y.rows(); ++i) {
                CHECK(out(i, g) >= lo - 1e-12 * (1 + std::fabs(lo)));
                CHECK(out(i, g) <= hi + 1e-12 * (1 + std::fabs(hi)));
            }
        }
    }
}

TEST_CASE("smoothing is permutation-equivariant") {
    std::mt19937_64 rng(16);
    const auto s = random_tissue(rng, 9);
    std::vector<std::size_t> perm(s.n_spots());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto ps = test::permute_sample(s, perm);

    const auto a8 = test::permute_rows(smooth_8n(s), perm);
    const auto b8 = smooth_8n(ps);
    for (std::size_t i = 0; i < a8.size(); ++i)
        CHECK(a8.values()[i] == doctest::Approx(b8.values()[i]).epsilon(1e-12));

    const SpcsParams p;
    const auto as = test::permute_rows(spcs_smooth(s, p), perm);
    const auto bs = spcs_smooth(ps, p);
    for (std::size_t i = 0; i < as.size(); ++i)
        CHECK(as.values()[i] == doctest::Approx(bs.values()[i]).epsilon(1e-9));
}

TEST_CASE("spcs handles isolated spots and tiny samples") {
    log::set_level(log::Level::quiet);
    const auto single = test::coords_sample({{0, 0}}, Matrix(1, 3, 2.0));
    CHECK(spcs_smooth(single, SpcsParams{}) == logcpm(single.expr_raw));

    // All rows identical: PCA scores are zero, pattern distances saturate.
    const auto flat = test::grid_sample(3, 3, 4, 1.0);
    const auto out = spcs_smooth(flat, SpcsParams{});
    const auto y = logcpm(flat.expr_raw);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.values()[i] == doctest::Approx(y.values()[i]).epsilon(1e-12));
    log::set_level(log::Level::warn);
}
