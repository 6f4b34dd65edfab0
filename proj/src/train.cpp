#include "merge/train.hpp"

#include "merge/clustering.hpp"
#include "merge/error.hpp"
#include "merge/graph.hpp"
#include "merge/log.hpp"
#include "merge/seed.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace merge {

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("train: epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("train: learning_rate must be >= 0");
    if (replicate_count < 1) throw Error("train: replicate_count must be >= 1");
}

namespace {

/// Adam moments, laid out like GatModel::parameters().
class AdamState {
public:
    explicit AdamState(const GatModel& model) {
        for (auto block : model.parameters()) {
            m_.emplace_back(block.size(), 0.0);
            v_.emplace_back(block.size(), 0.0);
        }
    }

    void step(GatModel& model, const GatModel& grads, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t_;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        auto params = model.parameters();
        const auto g = grads.parameters();
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t i = 0; i < params[b].size(); ++i) {
                const double gi = g[b][i];
                m_[b][i] = b1 * m_[b][i] + (1.0 - b1) * gi;
                v_[b][i] = b2 * v_[b][i] + (1.0 - b2) * gi * gi;
                params[b][i] -= lr * (m_[b][i] / c1) / (std::sqrt(v_[b][i] / c2) + eps);
            }
    }

private:
    std::vector<std::vector<double>> m_, v_;
    long long t_ = 0;
};

void sgd_step(GatModel& model, const GatModel& grads, double lr) {
    auto params = model.parameters();
    const auto g = grads.parameters();
    for (std::size_t b = 0; b < params.size(); ++b)
        for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= lr * g[b][i];
}

double mean_mse(const GatModel& model, std::span<const GraphSample> samples) {
    double total = 0.0;
    for (const auto& s : samples) total += mse_loss(predict(model, s), s.targets).loss;
    return total / static_cast<double>(samples.size());
}

void check_sample(const GatModel& model, const GraphSample& s) {
    if (s.features.rows() != s.n_nodes || s.targets.rows() != s.n_nodes)
        throw Error("sample '" + s.sample_id + "': feature/target rows differ from node count");
    if (s.features.cols() != model.in_dim())
        throw Error("sample '" + s.sample_id + "': feature width " + std::to_string(s.features.cols()) +
                    " does not match model input " + std::to_string(model.in_dim()));
    if (s.targets.cols() != model.out_dim())
        throw Error("sample '" + s.sample_id + "': target width " + std::to_string(s.targets.cols()) +
                    " does not match model output " + std::to_string(model.out_dim()));
}

} // namespace

Matrix predict(const GatModel& model, const GraphSample& s) {
    return gat_forward(model, s.pairs, s.n_nodes, s.features, Mode::eval, 0);
}

TrainResult train_replicate(GatModel model, std::span<const GraphSample> samples, const TrainConfig& config,
                            int replicate) {
    config.validate();
    if (samples.empty()) throw Error("train: need at least one training sample");
    model.validate();
    for (const auto& s : samples) check_sample(model, s);

    TrainResult r;
    AdamState adam(model);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto rep = static_cast<std::uint64_t>(replicate);
    std::mt19937_64 shuffler(derive_seed({config.seed, rep, 0x0de7}));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffler);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const auto& s = samples[idx];
            const auto step_seed = derive_seed({config.seed, rep, static_cast<std::uint64_t>(epoch), idx});
            auto g = backward(model, s.pairs, s.n_nodes, s.features, s.targets, Mode::train, step_seed);
            if (!std::isfinite(g.loss))
                throw DivergenceError("training diverged: non-finite loss at replicate " + std::to_string(replicate) +
                                      ", epoch " + std::to_string(epoch) + ", sample '" + s.sample_id + "'");
            epoch_loss += g.loss;
            if (config.optimizer == Optimizer::adam)
                adam.step(model, g.grads, config.learning_rate);
            else
                sgd_step(model, g.grads, config.learning_rate);
        }
        r.loss_curve.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    r.best_replicate = replicate;
    r.model = std::move(model);
    return r;
}

TrainResult train(const GatArchitecture& arch, std::span<const GraphSample> samples,
                  std::span<const GraphSample> selection, const TrainConfig& config) {
    config.validate();
    const auto scoring = selection.empty() ? samples : selection;
    TrainResult best;
    std::vector<double> scores;
    for (int rep = 0; rep < config.replicate_count; ++rep) {
        auto init = GatModel::init(arch, derive_seed({config.seed, static_cast<std::uint64_t>(rep), 0x1417}));
        auto result = train_replicate(std::move(init), samples, config, rep);
        const double score = mean_mse(result.model, scoring);
        log::info("replicate " + std::to_string(rep) + ": selection mse " + std::to_string(score));
        scores.push_back(score);
        if (rep == 0 || score < scores[static_cast<std::size_t>(best.best_replicate)]) best = std::move(result);
    }
    best.replicate_scores = std::move(scores);
    return best;
}

LinearBaseline fit_linear_baseline(std::span<const GraphSample> samples, double ridge) {
    if (samples.empty()) throw Error("linear baseline: no samples");
    const std::size_t d = samples.front().features.cols();
    const std::size_t m = samples.front().targets.cols();
    const auto p = static_cast<Eigen::Index>(d + 1);
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd xty = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(m));
    Eigen::VectorXd row(p);
    for (const auto& s : samples) {
        if (s.features.cols() != d || s.targets.cols() != m) throw Error("linear baseline: inconsistent widths");
        for (std::size_t i = 0; i < s.features.rows(); ++i) {
            for (std::size_t j = 0; j < d; ++j) row(static_cast<Eigen::Index>(j)) = s.features(i, j);
            row(p - 1) = 1.0;
            xtx.selfadjointView<Eigen::Lower>().rankUpdate(row);
            for (std::size_t g = 0; g < m; ++g) xty.col(static_cast<Eigen::Index>(g)) += row * s.targets(i, g);
        }
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();
    for (Eigen::Index j = 0; j < p - 1; ++j) xtx(j, j) += ridge;
    const Eigen::MatrixXd w = xtx.ldlt().solve(xty);
    LinearBaseline out{Matrix(d + 1, m)};
    for (std::size_t j = 0; j <= d; ++j)
        for (std::size_t g = 0; g < m; ++g)
            out.weights(j, g) = w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(g));
    return out;
}

Matrix predict(const LinearBaseline& model, const Matrix& features) {
    const std::size_t d = model.weights.rows() - 1;
    if (features.cols() != d) throw Error("linear baseline: feature width mismatch");
    Matrix out(features.rows(), model.weights.cols());
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t g = 0; g < out.cols(); ++g) {
            double acc = model.weights(d, g);
            for (std::size_t j = 0; j < d; ++j) acc += features(i, j) * model.weights(j, g);
            out(i, g) = acc;
        }
    return out;
}

Matrix make_targets(const STSample& sample, TargetKind kind, const SpcsParams& spcs) {
    switch (kind) {
    case TargetKind::logcpm: return logcpm(sample.expr_raw);
    case TargetKind::smooth_8n: return smooth_8n(sample, logcpm(sample.expr_raw));
    case TargetKind::spcs: return spcs_smooth(sample, spcs);
    }
    throw Error("unknown target kind");
}

GraphSample prepare_sample(const STSample& sample, const EmbeddingMatrix& emb, const PrepareOptions& opt) {
    if (emb.data.rows() != sample.n_spots()) throw Error("prepare: embedding rows differ from spot count");
    GraphSample g;
    g.sample_id = sample.sample_id;
    g.n_nodes = sample.n_spots();
    g.features = emb.data;
    g.targets = make_targets(sample, opt.target, opt.spcs);
    switch (opt.variant) {
    case GraphVariant::hierarchical: {
        const auto spatial = cluster_spatial(sample, emb, opt.cluster_size, opt.seed);
        const auto feature = cluster_feature(emb, opt.cluster_size, opt.seed);
        g.pairs = message_pairs(assemble(sample, spatial, feature));
        break;
    }
    case GraphVariant::one_hop: g.pairs = message_pairs(assemble_one_hop(sample)); break;
    case GraphVariant::none: break;
    }
    return g;
}

} // namespace merge
