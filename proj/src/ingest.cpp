#include "merge/ingest.hpp"

#include "merge/error.hpp"
#include "merge/tsv.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

namespace merge {

namespace {

std::string located(const tsv::Table& t, std::size_t row, const std::string& column) {
    std::ostringstream s;
    s << t.source.string() << ":" << t.line_numbers[row] << " (row " << row + 1 << ", column '"
      << column << "')";
    return s.str();
}

void require_header(const tsv::Table& t, const std::vector<std::string>& expected) {
    if (t.header.size() < expected.size() ||
        !std::equal(expected.begin(), expected.end(), t.header.begin()))
        throw Error(t.source.string() + ": header must start with '" + expected.front() + "'" +
                    (expected.size() > 1 ? " followed by the standard spot columns" : ""));
}

} // namespace

std::optional<std::size_t> STSample::gene_index(const std::string& name) const {
    const auto it = std::find(genes.begin(), genes.end(), name);
    if (it == genes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - genes.begin());
}

void validate(const STSample& s) {
    const std::size_t n = s.spots.size();
    if (s.expr_raw.rows() != n)
        throw Error("row-count mismatch: " + std::to_string(s.expr_raw.rows()) +
                    " expression rows for " + std::to_string(n) + " spots");
    if (s.expr_raw.cols() != s.genes.size())
        throw Error("column-count mismatch: expression has " + std::to_string(s.expr_raw.cols()) +
                    " columns for " + std::to_string(s.genes.size()) + " genes");
    std::set<std::pair<int, int>> seen;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sp = s.spots[i];
        if (sp.grid_row < 0 || sp.grid_col < 0)
            throw Error("negative grid coordinate for spot '" + sp.spot_id + "'");
        if (!seen.emplace(sp.grid_row, sp.grid_col).second)
            throw Error("duplicate grid coordinate (" + std::to_string(sp.grid_row) + ", " +
                        std::to_string(sp.grid_col) + ") at spot '" + sp.spot_id + "'");
        if (!ids.insert(sp.spot_id).second) throw Error("duplicate spot_id '" + sp.spot_id + "'");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < s.genes.size(); ++j) {
            const double v = s.expr_raw(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw Error("invalid expression value at spot '" + s.spots[i].spot_id +
                            "', gene '" + s.genes[j] + "'");
        }
    if (s.expr_smoothed &&
        (s.expr_smoothed->rows() != n || s.expr_smoothed->cols() != s.genes.size()))
        throw Error("smoothed expression shape does not match the sample");
}

std::string sample_id_from_path(const std::filesystem::path& spots_path) {
    std::string name = spots_path.filename().string();
    for (const std::string suffix : {".tsv", ".spots"})
        if (name.size() > suffix.size() && name.ends_with(suffix))
            name.erase(name.size() - suffix.size());
    return name;
}

STSample load_sample(const std::filesystem::path& spots_path,
                     const std::filesystem::path& expr_path) {
    const auto spots = tsv::read(spots_path);
    require_header(spots, {"spot_id", "grid_row", "grid_col", "pixel_x", "pixel_y"});

    STSample s;
    s.sample_id = sample_id_from_path(spots_path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < spots.rows.size(); ++r) {
        const auto& f = spots.rows[r];
        SpotRecord rec;
        rec.spot_id = f[0];
        rec.grid_row = static_cast<int>(tsv::parse_int(f[1], located(spots, r, "grid_row")));
        rec.grid_col = static_cast<int>(tsv::parse_int(f[2], located(spots, r, "grid_col")));
        rec.pixel_x = tsv::parse_double(f[3], located(spots, r, "pixel_x"));
        rec.pixel_y = tsv::parse_double(f[4], located(spots, r, "pixel_y"));
        if (!index.emplace(rec.spot_id, r).second)
            throw Error(located(spots, r, "spot_id") + ": duplicate spot_id '" + rec.spot_id + "'");
        s.spots.push_back(std::move(rec));
    }

    const auto expr = tsv::read(expr_path);
    require_header(expr, {"spot_id"});
    s.genes.assign(expr.header.begin() + 1, expr.header.end());
    if (expr.rows.size() != s.spots.size())
        throw Error(expr_path.string() + ": row-count mismatch: " + std::to_string(expr.rows.size()) +
                    " expression rows for " + std::to_string(s.spots.size()) + " spots");

    s.expr_raw = Matrix(s.spots.size(), s.genes.size());
    std::vector<bool> filled(s.spots.size(), false);
    for (std::size_t r = 0; r < expr.rows.size(); ++r) {
        const auto& f = expr.rows[r];
        const auto it = index.find(f[0]);
        if (it == index.end())
            throw Error(located(expr, r, "spot_id") + ": unknown spot_id '" + f[0] + "'");
        if (filled[it->second])
            throw Error(located(expr, r, "spot_id") + ": repeated spot_id '" + f[0] + "'");
        filled[it->second] = true;
        for (std::size_t j = 0; j < s.genes.size(); ++j) {
            const auto where = located(expr, r, s.genes[j]);
            const double v = tsv::parse_double(f[j + 1], where);
            if (!std::isfinite(v)) throw Error(where + ": non-finite expression value");
            if (v < 0.0) throw Error(where + ": negative expression value");
            s.expr_raw(it->second, j) = v;
        }
    }
    validate(s);
    return s;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const STSample& sample) {
    const auto t = tsv::read(path);
    require_header(t, {"spot_id"});
    const std::size_t d = t.header.size() - 1;
    if (d == 0) throw Error(path.string() + ": embedding file has no value columns");

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < sample.spots.size(); ++i) index.emplace(sample.spots[i].spot_id, i);

    EmbeddingMatrix emb{sample.sample_id, Matrix(sample.n_spots(), d)};
    std::vector<bool> filled(sample.n_spots(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        const auto it = index.find(f[0]);
        if (it == index.end())
            throw Error(located(t, r, "spot_id") + ": spot_id '" + f[0] + "' not in sample");
        if (filled[it->second])
            throw Error(located(t, r, "spot_id") + ": repeated spot_id '" + f[0] + "'");
        filled[it->second] = true;
        for (std::size_t j = 0; j < d; ++j) {
            const auto where = located(t, r, t.header[j + 1]);
            const double v = tsv::parse_double(f[j + 1], where);
            if (!std::isfinite(v)) throw Error(where + ": non-finite embedding value");
            emb.data(it->second, j) = v;
        }
    }
    std::string missing;
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i]) missing += (missing.empty() ? "" : ", ") + sample.spots[i].spot_id;
    if (!missing.empty()) throw Error(path.string() + ": missing embeddings for spot_id(s): " + missing);
    return emb;
}

void save_spots(const std::filesystem::path& path, const STSample& s) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(s.spots.size());
    for (const auto& sp : s.spots)
        rows.push_back({sp.spot_id, std::to_string(sp.grid_row), std::to_string(sp.grid_col),
                        tsv::format_double(sp.pixel_x), tsv::format_double(sp.pixel_y)});
    tsv::write(path, {"spot_id", "grid_row", "grid_col", "pixel_x", "pixel_y"}, rows);
}

namespace {

void save_matrix(const std::filesystem::path& path, const STSample& s,
                 std::vector<std::string> header, const Matrix& m) {
    if (m.rows() != s.n_spots()) throw Error("save: matrix rows do not match spot count");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<std::string> f;
        f.reserve(m.cols() + 1);
        f.push_back(s.spots[i].spot_id);
        for (double v : m.row(i)) f.push_back(tsv::format_double(v));
        rows.push_back(std::move(f));
    }
    tsv::write(path, header, rows);
}

} // namespace

void save_expression(const std::filesystem::path& path, const STSample& s, const Matrix& expr) {
    if (expr.cols() != s.n_genes()) throw Error("save_expression: column count differs from gene panel");
    std::vector<std::string> header{"spot_id"};
    header.insert(header.end(), s.genes.begin(), s.genes.end());
    save_matrix(path, s, std::move(header), expr);
}

void save_embeddings(const std::filesystem::path& path, const STSample& s,
                     const EmbeddingMatrix& emb) {
    std::vector<std::string> header{"spot_id"};
    for (std::size_t j = 0; j < emb.dim(); ++j) header.push_back("f" + std::to_string(j));
    save_matrix(path, s, std::move(header), emb.data);
}

GridIndex::GridIndex(const STSample& sample) {
    cells_.reserve(sample.n_spots());
    for (std::size_t i = 0; i < sample.n_spots(); ++i)
        cells_.emplace(key(sample.spots[i].grid_row, sample.spots[i].grid_col), i);
}

std::optional<std::size_t> GridIndex::find(int row, int col) const {
    if (row < 0 || col < 0) return std::nullopt;
    const auto it = cells_.find(key(row, col));
    if (it == cells_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> eight_neighbors(const STSample& sample, const GridIndex& grid,
                                         std::size_t spot_index) {
    if (spot_index >= sample.n_spots()) throw Error("eight_neighbors: spot index out of range");
    const auto& sp = sample.spots[spot_index];
    std::vector<std::size_t> out;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (auto j = grid.find(sp.grid_row + dr, sp.grid_col + dc)) out.push_back(*j);
        }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> eight_neighbors(const STSample& sample, std::size_t spot_index) {
    return eight_neighbors(sample, GridIndex(sample), spot_index);
}

} // namespace merge
