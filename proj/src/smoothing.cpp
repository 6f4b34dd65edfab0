#include "merge/smoothing.hpp"

#include "merge/error.hpp"
#include "merge/kernels.hpp"
#include "merge/linalg.hpp"
#include "merge/log.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace merge {

void SpcsParams::validate() const {
    if (tau_s < 0) throw Error("spcs: tau_s must be >= 0");
    if (tau_p < 0) throw Error("spcs: tau_p must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("spcs: alpha must lie in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("spcs: beta must lie in [0, 1]");
    if (pca_dim < 1) throw Error("spcs: pca_dim must be >= 1");
}

Matrix logcpm(const Matrix& expr) {
    Matrix out(expr.rows(), expr.cols());
    for (std::size_t i = 0; i < expr.rows(); ++i) {
        double total = 0.0;
        for (double v : expr.row(i)) total += v;
        if (total <= 0.0) continue;
        const double scale = 1e6 / total;
        for (std::size_t j = 0; j < expr.cols(); ++j) out(i, j) = std::log1p(scale * expr(i, j));
    }
    return out;
}

Matrix smooth_8n(const STSample& sample, const Matrix& values) {
    if (values.rows() != sample.n_spots()) throw Error("smooth_8n: row count differs from spot count");
    const GridIndex grid(sample);
    Matrix out(values.rows(), values.cols());
    const auto& k = simd::active();
    for (std::size_t i = 0; i < values.rows(); ++i) {
        auto nb = eight_neighbors(sample, grid, i);
        nb.push_back(i);
        std::sort(nb.begin(), nb.end());
        double* dst = out.row(i).data();
        for (std::size_t j : nb) k.axpy(1.0, values.row(j).data(), dst, values.cols());
        k.scale(1.0 / static_cast<double>(nb.size()), dst, values.cols());
    }
    return out;
}

PcaResult pca(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    const std::size_t m = x.cols();
    if (n < 2) throw Error("pca: need at least two rows");
    if (k < 1 || k > std::min(n, m))
        throw Error("pca: k=" + std::to_string(k) + " out of range [1, " +
                    std::to_string(std::min(n, m)) + "]");

    PcaResult r;
    r.mean = column_means(x);
    Eigen::MatrixXd centered(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) centered(i, j) = x(i, j) - r.mean[j];
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");

    r.components = Matrix(m, k);
    r.explained_variance.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto src = static_cast<Eigen::Index>(m - 1 - c); // eigenvalues ascend
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        r.explained_variance[c] = std::max(0.0, eig.eigenvalues()(src));
        for (std::size_t j = 0; j < m; ++j) r.components(j, c) = v(static_cast<Eigen::Index>(j));
    }
    r.scores = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                acc += centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                       r.components(j, c);
            r.scores(i, c) = acc;
        }
    return r;
}

namespace {

/// Centres a row and scales it to unit norm; false when the row is constant.
bool standardize(std::span<const double> row, std::vector<double>& out) {
    out.assign(row.begin(), row.end());
    double mean = 0.0;
    for (double v : out) mean += v;
    mean /= static_cast<double>(out.size());
    double ss = 0.0;
    for (double& v : out) {
        v -= mean;
        ss += v * v;
    }
    if (!(ss > 0.0)) return false;
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : out) v *= inv;
    return true;
}

constexpr double kMaxPatternDistance = 2.0;

} // namespace

double pattern_distance(const Matrix& scores, std::size_t i, std::size_t j) {
    if (i >= scores.rows() || j >= scores.rows()) throw Error("pattern_distance: index out of range");
    std::vector<double> a, b;
    if (!standardize(scores.row(i), a) || !standardize(scores.row(j), b)) {
        log::warn("pattern_distance: zero-variance score row; using maximum distance");
        return kMaxPatternDistance;
    }
    double r = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) r += a[t] * b[t];
    return 1.0 - std::clamp(r, -1.0, 1.0);
}

Matrix spcs_smooth(const STSample& sample, const SpcsParams& params) {
    return spcs_smooth_normalized(sample, logcpm(sample.expr_raw), params);
}

Matrix spcs_smooth_normalized(const STSample& sample, const Matrix& y, const SpcsParams& params) {
    params.validate();
    const std::size_t n = y.rows();
    const std::size_t m = y.cols();
    if (n != sample.n_spots()) throw Error("spcs: row count differs from spot count");
    Matrix out(n, m);
    if (n == 0) return out;

    // Pattern distances on standardised PCA scores.
    std::vector<std::vector<double>> zrows(n);
    std::vector<bool> valid(n, false);
    std::size_t constant_rows = 0;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.pca_dim), std::min(n, m));
    const bool use_pattern = params.tau_p > 0 && n >= 2 && k >= 1 && params.beta < 1.0;
    if (use_pattern) {
        const Matrix scores = pca_project(y, k);
        for (std::size_t i = 0; i < n; ++i) {
            valid[i] = standardize(scores.row(i), zrows[i]);
            if (!valid[i]) ++constant_rows;
        }
        if (constant_rows)
            log::warn("spcs: " + std::to_string(constant_rows) +
                      " spot(s) with zero-variance PCA scores; pattern distance set to maximum");
    }
    auto distance = [&](std::size_t i, std::size_t j) {
        if (!valid[i] || !valid[j]) return kMaxPatternDistance;
        double r = 0.0;
        for (std::size_t t = 0; t < k; ++t) r += zrows[i][t] * zrows[j][t];
        return 1.0 - std::clamp(r, -1.0, 1.0);
    };

    const GridIndex grid(sample);
    const auto& kern = simd::active();
    std::vector<std::pair<std::size_t, double>> spatial;
    std::vector<std::pair<double, std::size_t>> candidates;
    std::vector<double> spatial_term(m), pattern_term(m);

    for (std::size_t s = 0; s < n; ++s) {
        const auto yrow = y.row(s);

        spatial.clear();
        const auto& sp = sample.spots[s];
        for (int dr = -params.tau_s; dr <= params.tau_s; ++dr) {
            const int rem = params.tau_s - std::abs(dr);
            for (int dc = -rem; dc <= rem; ++dc) {
                const int d = std::abs(dr) + std::abs(dc);
                if (d == 0) continue;
                if (auto j = grid.find(sp.grid_row + dr, sp.grid_col + dc))
                    spatial.emplace_back(*j, 1.0 / d);
            }
        }
        std::sort(spatial.begin(), spatial.end());
        if (spatial.empty()) {
            std::copy(yrow.begin(), yrow.end(), spatial_term.begin());
        } else {
            double wsum = 0.0;
            for (const auto& [j, w] : spatial) wsum += w;
            std::fill(spatial_term.begin(), spatial_term.end(), 0.0);
            for (const auto& [j, w] : spatial) kern.axpy(w / wsum, y.row(j).data(), spatial_term.data(), m);
        }

        std::size_t take = 0;
        if (use_pattern) {
            candidates.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != s) candidates.emplace_back(distance(s, j), j);
            take = std::min<std::size_t>(static_cast<std::size_t>(params.tau_p), candidates.size());
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                              candidates.end());
            candidates.resize(take);
            std::sort(candidates.begin(), candidates.end(),
                      [](const auto& a, const auto& b) { return a.second < b.second; });
        }
        if (take == 0) {
            std::copy(yrow.begin(), yrow.end(), pattern_term.begin());
        } else {
            double wsum = 0.0;
            for (const auto& [d, j] : candidates) wsum += std::exp(-d);
            std::fill(pattern_term.begin(), pattern_term.end(), 0.0);
            for (const auto& [d, j] : candidates)
                kern.axpy(std::exp(-d) / wsum, y.row(j).data(), pattern_term.data(), m);
        }

        auto dst = out.row(s);
        for (std::size_t g = 0; g < m; ++g) {
            const double mixed = params.beta * spatial_term[g] + (1.0 - params.beta) * pattern_term[g];
            dst[g] = (1.0 - params.alpha) * yrow[g] + params.alpha * mixed;
        }
    }
    return out;
}

} // namespace merge
