#include "merge/heatmap.hpp"

#include "merge/error.hpp"
#include "merge/metrics.hpp"
#include "merge/tsv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace merge {

namespace {

constexpr int kCell = 8;
constexpr int kGap = 8;

std::array<unsigned char, 3> colormap(double t) {
    // Dark blue -> teal -> yellow.
    static constexpr std::array<std::array<double, 3>, 5> stops{{
        {0.27, 0.00, 0.33}, {0.23, 0.32, 0.55}, {0.13, 0.57, 0.55}, {0.37, 0.79, 0.38}, {0.99, 0.91, 0.14}}};
    if (!std::isfinite(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const auto lo = std::min(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(lo);
    std::array<unsigned char, 3> rgb{};
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<unsigned char>(std::lround(255.0 * ((1 - f) * stops[lo][c] + f * stops[lo + 1][c])));
    return rgb;
}

} // namespace

HeatmapFiles heatmap_export(const STSample& sample, const std::string& gene, const Matrix& pred, const Matrix& truth,
                            const std::filesystem::path& prefix) {
    const auto g = sample.gene_index(gene);
    if (!g) {
        std::string available;
        for (const auto& name : sample.genes) available += (available.empty() ? "" : ", ") + name;
        throw Error("gene '" + gene + "' not in panel; available genes: " + available);
    }
    const std::size_t n = sample.n_spots();
    if (pred.rows() != n || truth.rows() != n || pred.cols() != sample.n_genes() || truth.cols() != sample.n_genes())
        throw Error("heatmap: prediction/truth shape does not match the sample");

    std::vector<double> tv(n), pv(n);
    for (std::size_t i = 0; i < n; ++i) {
        tv[i] = truth(i, *g);
        pv[i] = pred(i, *g);
    }

    HeatmapFiles files;
    files.table = prefix;
    files.table += ".tsv";
    files.image = prefix;
    files.image += ".ppm";
    files.pcc = pearson(pv, tv);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < n; ++i)
        rows.push_back({std::to_string(sample.spots[i].grid_row), std::to_string(sample.spots[i].grid_col),
                        tsv::format_double(tv[i]), tsv::format_double(pv[i])});
    tsv::write(files.table, {"grid_row", "grid_col", "truth", "pred"}, rows);

    int max_row = 0, max_col = 0;
    for (const auto& sp : sample.spots) {
        max_row = std::max(max_row, sp.grid_row);
        max_col = std::max(max_col, sp.grid_col);
    }
    const int panel_w = (max_col + 1) * kCell;
    const int width = 2 * panel_w + kGap;
    const int height = (max_row + 1) * kCell;
    double lo = n ? std::min(*std::min_element(tv.begin(), tv.end()), *std::min_element(pv.begin(), pv.end())) : 0.0;
    double hi = n ? std::max(*std::max_element(tv.begin(), tv.end()), *std::max_element(pv.begin(), pv.end())) : 0.0;
    const double span = hi > lo ? hi - lo : 1.0;

    std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * 3, 255);
    auto paint = [&](int x0, int y0, double v) {
        const auto rgb = colormap((v - lo) / span);
        for (int y = y0; y < y0 + kCell; ++y)
            for (int x = x0; x < x0 + kCell; ++x)
                std::copy(rgb.begin(), rgb.end(), pixels.begin() + (static_cast<std::ptrdiff_t>(y) * width + x) * 3);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const int x = sample.spots[i].grid_col * kCell;
        const int y = sample.spots[i].grid_row * kCell;
        paint(x, y, tv[i]);
        paint(x + panel_w + kGap, y, pv[i]);
    }

    if (files.image.has_parent_path()) std::filesystem::create_directories(files.image.parent_path());
    std::ofstream out(files.image, std::ios::binary);
    if (!out) throw Error("cannot write " + files.image.string());
    out << "P6\n# sample " << sample.sample_id << "\n# gene " << gene << "\n# pcc " << tsv::format_double(files.pcc)
        << "\n# panels truth|prediction\n# range " << tsv::format_double(lo) << ' ' << tsv::format_double(hi) << '\n'
        << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error("write failed: " + files.image.string());
    return files;
}

std::vector<HeatmapRow> read_heatmap_table(const std::filesystem::path& path) {
    const auto t = tsv::read(path);
    if (t.header != std::vector<std::string>{"grid_row", "grid_col", "truth", "pred"})
        throw Error(path.string() + ": expected header 'grid_row grid_col truth pred'");
    std::vector<HeatmapRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto where = path.string() + ":" + std::to_string(t.line_numbers[r]);
        rows.push_back({static_cast<int>(tsv::parse_int(t.rows[r][0], where)),
                        static_cast<int>(tsv::parse_int(t.rows[r][1], where)), tsv::parse_double(t.rows[r][2], where),
                        tsv::parse_double(t.rows[r][3], where)});
    }
    return rows;
}

} // namespace merge
