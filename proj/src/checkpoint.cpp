#include "merge/gnn.hpp"

#include "merge/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace merge {

namespace {

constexpr const char* kMagic = "merge-gat-checkpoint";
constexpr int kVersion = 1;

std::string hex(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    if (ec != std::errc()) throw Error("checkpoint: cannot format value");
    return std::string(buf, ptr);
}

double unhex(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    bool negative = false;
    if (first != last && *first == '-') {
        negative = true;
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::hex);
    if (ec != std::errc() || ptr != last) throw Error("checkpoint: malformed value '" + s + "'");
    return negative ? -v : v;
}

void write_block(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                 std::span<const double> values) {
    out << "block " << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out << (c ? " " : "") << hex(values[r * cols + c]);
        out << '\n';
    }
}

void expect(std::istream& in, const std::string& token) {
    std::string got;
    if (!(in >> got) || got != token) throw Error("checkpoint: expected '" + token + "', found '" + got + "'");
}

std::vector<double> read_block(std::istream& in, const std::string& name, std::size_t rows, std::size_t cols) {
    expect(in, "block");
    expect(in, name);
    std::size_t r = 0, c = 0;
    if (!(in >> r >> c) || r != rows || c != cols)
        throw Error("checkpoint: block '" + name + "' has shape " + std::to_string(r) + "x" + std::to_string(c) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    std::vector<double> v(rows * cols);
    std::string tok;
    for (auto& x : v) {
        if (!(in >> tok)) throw Error("checkpoint: truncated block '" + name + "'");
        x = unhex(tok);
    }
    return v;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const GatModel& model) {
    model.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << kMagic << ' ' << kVersion << '\n';
    out << "edge_dropout " << hex(model.edge_dropout_p) << '\n';
    out << "layers " << model.layers.size() << '\n';
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& p = model.layers[l];
        out << "layer " << l << " heads " << p.heads << " head_dim " << p.head_dim << " final " << (p.final ? 1 : 0)
            << " in_dim " << p.in_dim() << '\n';
        write_block(out, "weight", p.weight.rows(), p.weight.cols(), p.weight.values());
        write_block(out, "attn_src", p.attn_src.rows(), p.attn_src.cols(), p.attn_src.values());
        write_block(out, "attn_dst", p.attn_dst.rows(), p.attn_dst.cols(), p.attn_dst.values());
        if (!p.final) {
            write_block(out, "ln_scale", 1, p.ln_scale.size(), p.ln_scale);
            write_block(out, "ln_shift", 1, p.ln_shift.size(), p.ln_shift);
        }
    }
    out << "end\n";
    if (!out) throw Error("write failed: " + path.string());
}

GatModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    expect(in, kMagic);
    int version = 0;
    if (!(in >> version) || version != kVersion)
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    GatModel m;
    std::string tok;
    expect(in, "edge_dropout");
    in >> tok;
    m.edge_dropout_p = unhex(tok);
    std::size_t n_layers = 0;
    expect(in, "layers");
    if (!(in >> n_layers) || n_layers == 0) throw Error("checkpoint: bad layer count");
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t idx = 0, in_dim = 0;
        int final = 0;
        GatLayerParams p;
        expect(in, "layer");
        in >> idx;
        if (idx != l) throw Error("checkpoint: layers out of order");
        expect(in, "heads");
        in >> p.heads;
        expect(in, "head_dim");
        in >> p.head_dim;
        expect(in, "final");
        in >> final;
        expect(in, "in_dim");
        in >> in_dim;
        if (!in || p.heads < 1 || p.head_dim < 1) throw Error("checkpoint: malformed layer header");
        p.final = final != 0;
        const auto H = static_cast<std::size_t>(p.heads);
        const auto F = static_cast<std::size_t>(p.head_dim);
        auto fill = [&in](Matrix& m, const std::string& name, std::size_t r, std::size_t c) {
            const auto v = read_block(in, name, r, c);
            m = Matrix(r, c);
            std::copy(v.begin(), v.end(), m.data());
        };
        fill(p.weight, "weight", in_dim, H * F);
        fill(p.attn_src, "attn_src", H, F);
        fill(p.attn_dst, "attn_dst", H, F);
        if (!p.final) {
            p.ln_scale = read_block(in, "ln_scale", 1, H * F);
            p.ln_shift = read_block(in, "ln_shift", 1, H * F);
        }
        m.layers.push_back(std::move(p));
    }
    expect(in, "end");
    m.validate();
    return m;
}

} // namespace merge
