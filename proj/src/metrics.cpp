#include "merge/metrics.hpp"

#include "merge/error.hpp"

#include <cmath>
#include <limits>

namespace merge {

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("pearson: length mismatch");
    const std::size_t n = a.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double r = sab / std::sqrt(saa * sbb);
    return std::fmax(-1.0, std::fmin(1.0, r));
}

MetricsReport compute_metrics(const Matrix& pred, const Matrix& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw Error("compute_metrics: shape mismatch");
    if (pred.empty()) throw Error("compute_metrics: empty matrices");
    MetricsReport r;
    double se = 0.0, ae = 0.0;
    const auto p = pred.values();
    const auto t = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        se += d * d;
        ae += std::fabs(d);
    }
    r.mse = se / static_cast<double>(p.size());
    r.mae = ae / static_cast<double>(p.size());

    const std::size_t n = pred.rows(), m = pred.cols();
    std::vector<double> pc(n), tc(n);
    double total = 0.0;
    std::size_t defined = 0;
    r.per_gene_pcc.resize(m);
    for (std::size_t g = 0; g < m; ++g) {
        for (std::size_t i = 0; i < n; ++i) {
            pc[i] = pred(i, g);
            tc[i] = truth(i, g);
        }
        const double v = pearson(pc, tc);
        r.per_gene_pcc[g] = v;
        if (std::isnan(v)) {
            ++r.excluded_genes;
        } else {
            total += v;
            ++defined;
        }
    }
    r.pcc = defined ? total / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

MetricsReport average(const std::vector<MetricsReport>& reports) {
    MetricsReport out;
    if (reports.empty()) return out;
    const auto k = static_cast<double>(reports.size());
    const std::size_t m = reports.front().per_gene_pcc.size();
    out.per_gene_pcc.assign(m, 0.0);
    std::vector<std::size_t> counts(m, 0);
    double pcc_total = 0.0;
    std::size_t pcc_count = 0;
    for (const auto& r : reports) {
        out.mse += r.mse / k;
        out.mae += r.mae / k;
        if (!std::isnan(r.pcc)) {
            pcc_total += r.pcc;
            ++pcc_count;
        }
        out.excluded_genes += r.excluded_genes;
        for (std::size_t g = 0; g < m && g < r.per_gene_pcc.size(); ++g)
            if (!std::isnan(r.per_gene_pcc[g])) {
                out.per_gene_pcc[g] += r.per_gene_pcc[g];
                ++counts[g];
            }
    }
    out.pcc = pcc_count ? pcc_total / static_cast<double>(pcc_count) : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t g = 0; g < m; ++g)
        out.per_gene_pcc[g] = counts[g] ? out.per_gene_pcc[g] / static_cast<double>(counts[g])
                                        : std::numeric_limits<double>::quiet_NaN();
    return out;
}

} // namespace merge
