#include "merge/gnn.hpp"

#include "merge/error.hpp"
#include "merge/kernels.hpp"
#include "merge/seed.hpp"
#include "merge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace merge {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kLayerNormEps = 1e-5;

void glorot(Matrix& m, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

inline double leaky(double v) { return v > 0.0 ? v : kLeakySlope * v; }

} // namespace

GatModel GatModel::init(const GatArchitecture& a, std::uint64_t seed) {
    if (a.layers < 1 || a.in_dim < 1 || a.out_dim < 1 || a.hidden_heads < 1 || a.head_dim < 1 || a.final_heads < 1)
        throw Error("gat: architecture dimensions must be positive");
    if (!(a.edge_dropout >= 0.0 && a.edge_dropout < 1.0)) throw Error("gat: edge dropout must lie in [0, 1)");
    std::mt19937_64 rng(splitmix64(seed));
    GatModel m;
    m.edge_dropout_p = a.edge_dropout;
    std::size_t in = static_cast<std::size_t>(a.in_dim);
    for (int l = 0; l < a.layers; ++l) {
        GatLayerParams p;
        p.final = l == a.layers - 1;
        p.heads = p.final ? a.final_heads : a.hidden_heads;
        p.head_dim = p.final ? a.out_dim : a.head_dim;
        const auto H = static_cast<std::size_t>(p.heads);
        const auto F = static_cast<std::size_t>(p.head_dim);
        p.weight = Matrix(in, H * F);
        glorot(p.weight, in, H * F, rng);
        p.attn_src = Matrix(H, F);
        p.attn_dst = Matrix(H, F);
        glorot(p.attn_src, 1, F, rng);
        glorot(p.attn_dst, 1, F, rng);
        if (!p.final) {
            p.ln_scale.assign(H * F, 1.0);
            p.ln_shift.assign(H * F, 0.0);
        }
        in = p.out_dim();
        m.layers.push_back(std::move(p));
    }
    return m;
}

GatModel GatModel::zeros_like() const {
    GatModel z(*this);
    for (auto block : z.parameters()) std::fill(block.begin(), block.end(), 0.0);
    return z;
}

std::vector<std::span<double>> GatModel::parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
        out.push_back(l.weight.values());
        out.push_back(l.attn_src.values());
        out.push_back(l.attn_dst.values());
        if (!l.ln_scale.empty()) {
            out.push_back(l.ln_scale);
            out.push_back(l.ln_shift);
        }
    }
    return out;
}

std::vector<std::span<const double>> GatModel::parameters() const {
    std::vector<std::span<const double>> out;
    for (auto block : const_cast<GatModel*>(this)->parameters()) out.emplace_back(block);
    return out;
}

std::vector<std::string> GatModel::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto prefix = "layer" + std::to_string(l) + ".";
        for (const char* name : {"weight", "attn_src", "attn_dst"}) out.push_back(prefix + name);
        if (!layers[l].ln_scale.empty()) {
            out.push_back(prefix + "ln_scale");
            out.push_back(prefix + "ln_shift");
        }
    }
    return out;
}

std::size_t GatModel::parameter_count() const {
    std::size_t total = 0;
    for (auto block : parameters()) total += block.size();
    return total;
}

void GatModel::validate() const {
    if (layers.empty()) throw Error("gat: model has no layers");
    if (!(edge_dropout_p >= 0.0 && edge_dropout_p < 1.0)) throw Error("gat: edge dropout must lie in [0, 1)");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& p = layers[l];
        const auto where = "gat layer " + std::to_string(l) + ": ";
        const bool last = l + 1 == layers.size();
        if (p.final != last) throw Error(where + "only the last layer may be final");
        if (p.heads < 1 || p.head_dim < 1) throw Error(where + "heads and head_dim must be positive");
        const auto H = static_cast<std::size_t>(p.heads);
        const auto F = static_cast<std::size_t>(p.head_dim);
        if (p.weight.cols() != H * F) throw Error(where + "weight width != heads*head_dim");
        if (p.attn_src.rows() != H || p.attn_src.cols() != F || p.attn_dst.rows() != H || p.attn_dst.cols() != F)
            throw Error(where + "attention vector shape mismatch");
        const std::size_t ln = p.final ? 0 : H * F;
        if (p.ln_scale.size() != ln || p.ln_shift.size() != ln) throw Error(where + "layer-norm shape mismatch");
        if (l > 0 && layers[l - 1].out_dim() != p.in_dim()) throw Error(where + "input width does not match previous layer");
    }
    for (auto block : parameters())
        for (double v : block)
            if (!std::isfinite(v)) throw Error("gat: non-finite parameter");
}

MessageGraph build_message_graph(std::size_t n, std::span<const NodePair> pairs) {
    std::vector<std::uint32_t> degree(n, 1);
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) throw Error("message graph: node index out of range");
        if (a == b) continue;
        ++degree[a];
        ++degree[b];
    }
    MessageGraph g;
    g.n_nodes = n;
    g.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + degree[i];
    g.sources.resize(g.offsets[n]);
    std::vector<std::uint32_t> fill(g.offsets.begin(), g.offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i) g.sources[fill[i]++] = static_cast<std::uint32_t>(i);
    for (const auto& [a, b] : pairs) {
        if (a == b) continue;
        g.sources[fill[a]++] = b;
        g.sources[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto first = g.sources.begin() + g.offsets[i];
        auto last = g.sources.begin() + g.offsets[i + 1];
        std::sort(first, last);
        if (std::adjacent_find(first, last) != last) throw Error("message graph: duplicate edge");
    }
    return g;
}

std::vector<bool> edge_keep_mask(std::size_t n_pairs, double p, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ 0x5deece66dULL));
    std::vector<bool> keep(n_pairs);
    for (std::size_t e = 0; e < n_pairs; ++e) keep[e] = uniform01(rng) >= p;
    return keep;
}

std::vector<NodePair> apply_mask(std::span<const NodePair> pairs, const std::vector<bool>& keep) {
    if (keep.size() != pairs.size()) throw Error("apply_mask: mask length mismatch");
    std::vector<NodePair> out;
    out.reserve(pairs.size());
    for (std::size_t e = 0; e < pairs.size(); ++e)
        if (keep[e]) out.push_back(pairs[e]);
    return out;
}

Matrix gat_layer_forward(const Matrix& x, const MessageGraph& g, const GatLayerParams& p, LayerTrace* trace) {
    const std::size_t n = x.rows();
    if (x.cols() != p.in_dim()) throw Error("gat layer: input width " + std::to_string(x.cols()) +
                                            " != expected " + std::to_string(p.in_dim()));
    if (g.n_nodes != n) throw Error("gat layer: graph size differs from feature rows");
    const auto H = static_cast<std::size_t>(p.heads);
    const auto F = static_cast<std::size_t>(p.head_dim);
    const auto& k = simd::active();

    Matrix z = matmul(x, p.weight);
    Matrix ss(n, H), ds(n, H);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < H; ++h) {
            const double* zi = z.row(i).data() + h * F;
            ss(i, h) = k.dot(p.attn_src.row(h).data(), zi, F);
            ds(i, h) = k.dot(p.attn_dst.row(h).data(), zi, F);
        }

    const std::size_t E = g.n_edges();
    std::vector<double> raw(E * H), alpha(E * H);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = g.offsets[i], e = g.offsets[i + 1];
        for (std::size_t h = 0; h < H; ++h) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t q = b; q < e; ++q) {
                const double r = ss(g.sources[q], h) + ds(i, h);
                raw[q * H + h] = r;
                alpha[q * H + h] = leaky(r);
                mx = std::max(mx, alpha[q * H + h]);
            }
            double total = 0.0;
            for (std::size_t q = b; q < e; ++q) {
                const double a = std::exp(alpha[q * H + h] - mx);
                alpha[q * H + h] = a;
                total += a;
            }
            const double inv = 1.0 / total;
            for (std::size_t q = b; q < e; ++q) alpha[q * H + h] *= inv;
        }
    }

    Matrix agg(n, p.out_dim());
    const double head_scale = p.final ? 1.0 / static_cast<double>(H) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = agg.row(i).data();
        for (std::size_t q = g.offsets[i]; q < g.offsets[i + 1]; ++q) {
            const double* zj = z.row(g.sources[q]).data();
            for (std::size_t h = 0; h < H; ++h)
                k.axpy(alpha[q * H + h] * head_scale, zj + h * F, p.final ? dst : dst + h * F, F);
        }
    }

    Matrix out;
    Matrix normalized;
    std::vector<double> inv_std;
    if (p.final) {
        out = agg;
    } else {
        const std::size_t w = H * F;
        out = Matrix(n, w);
        normalized = Matrix(n, w);
        inv_std.resize(n);
        std::vector<double> act(w);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < w; ++f) {
                const double v = agg(i, f);
                act[f] = v > 0.0 ? v : std::expm1(v);
            }
            double mean = 0.0;
            for (double v : act) mean += v;
            mean /= static_cast<double>(w);
            double var = 0.0;
            for (double v : act) var += (v - mean) * (v - mean);
            var /= static_cast<double>(w);
            const double is = 1.0 / std::sqrt(var + kLayerNormEps);
            inv_std[i] = is;
            for (std::size_t f = 0; f < w; ++f) {
                const double xh = (act[f] - mean) * is;
                normalized(i, f) = xh;
                out(i, f) = p.ln_scale[f] * xh + p.ln_shift[f];
            }
        }
    }

    if (trace) {
        trace->input = x;
        trace->z = std::move(z);
        trace->src_score = std::move(ss);
        trace->dst_score = std::move(ds);
        trace->raw = std::move(raw);
        trace->alpha = std::move(alpha);
        trace->aggregated = std::move(agg);
        trace->normalized = std::move(normalized);
        trace->inv_std = std::move(inv_std);
    }
    return out;
}

namespace {

/// Accumulates parameter gradients into grad; returns d loss / d input
/// unless need_input_grad is false.
Matrix gat_layer_backward(const LayerTrace& t, const MessageGraph& g, const GatLayerParams& p,
                          const Matrix& dy, GatLayerParams& grad, bool need_input_grad) {
    const std::size_t n = t.input.rows();
    const auto H = static_cast<std::size_t>(p.heads);
    const auto F = static_cast<std::size_t>(p.head_dim);
    const auto& k = simd::active();

    Matrix dagg(n, p.out_dim());
    if (p.final) {
        dagg = dy;
    } else {
        const std::size_t w = H * F;
        std::vector<double> dxhat(w);
        for (std::size_t i = 0; i < n; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t f = 0; f < w; ++f) {
                const double xh = t.normalized(i, f);
                grad.ln_scale[f] += dy(i, f) * xh;
                grad.ln_shift[f] += dy(i, f);
                dxhat[f] = dy(i, f) * p.ln_scale[f];
                m1 += dxhat[f];
                m2 += dxhat[f] * xh;
            }
            m1 /= static_cast<double>(w);
            m2 /= static_cast<double>(w);
            for (std::size_t f = 0; f < w; ++f) {
                const double dact = t.inv_std[i] * (dxhat[f] - m1 - t.normalized(i, f) * m2);
                const double a = t.aggregated(i, f);
                dagg(i, f) = a > 0.0 ? dact : dact * std::exp(a);
            }
        }
    }

    Matrix dz(n, H * F);
    Matrix dss(n, H), dds(n, H);
    const double head_scale = p.final ? 1.0 / static_cast<double>(H) : 1.0;
    std::vector<double> dalpha;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = g.offsets[i], e = g.offsets[i + 1];
        dalpha.resize(e - b);
        for (std::size_t h = 0; h < H; ++h) {
            const double* dblock = p.final ? dagg.row(i).data() : dagg.row(i).data() + h * F;
            double weighted = 0.0;
            for (std::size_t q = b; q < e; ++q) {
                const std::size_t j = g.sources[q];
                const double a = t.alpha[q * H + h];
                const double da = head_scale * k.dot(dblock, t.z.row(j).data() + h * F, F);
                dalpha[q - b] = da;
                weighted += a * da;
                k.axpy(a * head_scale, dblock, dz.row(j).data() + h * F, F);
            }
            for (std::size_t q = b; q < e; ++q) {
                const double a = t.alpha[q * H + h];
                const double de = a * (dalpha[q - b] - weighted);
                const double draw = t.raw[q * H + h] > 0.0 ? de : kLeakySlope * de;
                dss(g.sources[q], h) += draw;
                dds(i, h) += draw;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < H; ++h) {
            const double* zi = t.z.row(i).data() + h * F;
            double* dzi = dz.row(i).data() + h * F;
            k.axpy(dss(i, h), zi, grad.attn_src.row(h).data(), F);
            k.axpy(dds(i, h), zi, grad.attn_dst.row(h).data(), F);
            k.axpy(dss(i, h), p.attn_src.row(h).data(), dzi, F);
            k.axpy(dds(i, h), p.attn_dst.row(h).data(), dzi, F);
        }
    matmul_at_b_acc(t.input, dz, grad.weight);
    if (!need_input_grad) return {};
    return matmul_a_bt(dz, p.weight);
}

} // namespace

Matrix gat_forward(const GatModel& model, const MessageGraph& g, const Matrix& x, ForwardTrace* trace) {
    if (model.layers.empty()) throw Error("gat: model has no layers");
    if (trace) trace->layers.assign(model.layers.size(), {});
    Matrix h = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        h = gat_layer_forward(h, g, model.layers[l], trace ? &trace->layers[l] : nullptr);
    return h;
}

namespace {

MessageGraph masked_graph(const GatModel& model, std::span<const NodePair> pairs, std::size_t n, Mode mode,
                          std::uint64_t seed) {
    if (mode == Mode::eval || model.edge_dropout_p == 0.0) return build_message_graph(n, pairs);
    const auto kept = apply_mask(pairs, edge_keep_mask(pairs.size(), model.edge_dropout_p, seed));
    return build_message_graph(n, kept);
}

} // namespace

Matrix gat_forward(const GatModel& model, std::span<const NodePair> pairs, std::size_t n, const Matrix& x,
                   Mode mode, std::uint64_t seed) {
    return gat_forward(model, masked_graph(model, pairs, n, mode, seed), x);
}

LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw Error("mse_loss: shape mismatch");
    LossGrad r;
    r.grad = Matrix(pred.rows(), pred.cols());
    const auto count = static_cast<double>(pred.size());
    if (count == 0) return r;
    double total = 0.0;
    const auto p = pred.values();
    const auto t = target.values();
    auto gvals = r.grad.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        total += d * d;
        gvals[i] = 2.0 * d / count;
    }
    r.loss = total / count;
    return r;
}

Gradients backward(const GatModel& model, const MessageGraph& g, const Matrix& x, const Matrix& y) {
    ForwardTrace trace;
    Gradients out;
    out.prediction = gat_forward(model, g, x, &trace);
    auto lg = mse_loss(out.prediction, y);
    out.loss = lg.loss;
    out.grads = model.zeros_like();
    Matrix d = std::move(lg.grad);
    for (std::size_t l = model.layers.size(); l-- > 0;)
        d = gat_layer_backward(trace.layers[l], g, model.layers[l], d, out.grads.layers[l], l > 0);
    return out;
}

Gradients backward(const GatModel& model, std::span<const NodePair> pairs, std::size_t n, const Matrix& x,
                   const Matrix& y, Mode mode, std::uint64_t seed) {
    return backward(model, masked_graph(model, pairs, n, mode, seed), x, y);
}

} // namespace merge
