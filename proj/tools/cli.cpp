#include "cli.hpp"

#include "merge/clustering.hpp"
#include "merge/crossval.hpp"
#include "merge/error.hpp"
#include "merge/graph.hpp"
#include "merge/heatmap.hpp"
#include "merge/ingest.hpp"
#include "merge/kernels.hpp"
#include "merge/log.hpp"
#include "merge/seed.hpp"
#include "merge/smoothing.hpp"
#include "merge/synth.hpp"
#include "merge/train.hpp"
#include "merge/tsv.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace merge::cli {

namespace {

constexpr const char* kSnapshotName = "run_config.cfg";

/// Every tunable shared by the subcommands.
struct Options {
    std::string spots, expr, emb, data, out, model, sample, gene;
    std::string method = "spcs";
    std::string target = "spcs";
    std::string graph = "hierarchical";
    std::string optimizer = "adam";
    SpcsParams spcs;
    int cluster_size = 100;
    std::uint64_t seed = kDefaultSeed;
    int epochs = 400;
    double lr = 1e-3;
    int replicates = 5;
    int folds = 8;
    int hidden_heads = 8;
    int head_dim = 32;
    int final_heads = 1;
    int layers = 4;
    double edge_dropout = 0.2;
    double ridge = 1e-3;
    bool baseline = false;
    std::string simd = "auto";
    // synth
    SynthSpec synth;
    int count = 1;
    std::string prefix = "synth";
};

void add_smoothing(CLI::App* app, Options& o) {
    app->add_option("--tau-s", o.spcs.tau_s, "spatial radius (Manhattan grid steps)");
    app->add_option("--tau-p", o.spcs.tau_p, "pattern neighbours per spot");
    app->add_option("--alpha", o.spcs.alpha, "smoothing strength in [0,1]");
    app->add_option("--beta", o.spcs.beta, "spatial share of the smoothed term in [0,1]");
    app->add_option("--pca-dim", o.spcs.pca_dim, "PCA components for pattern distances");
}

void add_sample_files(CLI::App* app, Options& o, bool need_emb) {
    app->add_option("--spots", o.spots, "spot table (spot_id, grid_row, grid_col, pixel_x, pixel_y)")->required();
    app->add_option("--expr", o.expr, "expression table (spot_id, genes...)")->required();
    auto* e = app->add_option("--emb", o.emb, "embedding table (spot_id, f0...)");
    if (need_emb) e->required();
}

void add_graph(CLI::App* app, Options& o) {
    app->add_option("--size", o.cluster_size, "target spots per cluster");
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("--graph", o.graph, "graph variant")->check(CLI::IsMember({"hierarchical", "one-hop", "none"}));
}

void add_target(CLI::App* app, Options& o) {
    app->add_option("--target", o.target, "regression target")->check(CLI::IsMember({"logcpm", "8n", "spcs"}));
    add_smoothing(app, o);
}

void add_model(CLI::App* app, Options& o) {
    app->add_option("--epochs", o.epochs, "training epochs");
    app->add_option("--lr", o.lr, "learning rate");
    app->add_option("--optimizer", o.optimizer, "optimizer")->check(CLI::IsMember({"adam", "sgd"}));
    app->add_option("--replicates", o.replicates, "independently initialised replicates");
    app->add_option("--hidden-heads", o.hidden_heads, "attention heads on hidden layers");
    app->add_option("--head-dim", o.head_dim, "features per head");
    app->add_option("--final-heads", o.final_heads, "attention heads on the output layer");
    app->add_option("--layers", o.layers, "graph attention layers");
    app->add_option("--edge-dropout", o.edge_dropout, "edge dropout probability");
}

GatArchitecture architecture(const Options& o, std::size_t in_dim, std::size_t out_dim) {
    GatArchitecture a;
    a.in_dim = static_cast<int>(in_dim);
    a.out_dim = static_cast<int>(out_dim);
    a.hidden_heads = o.hidden_heads;
    a.head_dim = o.head_dim;
    a.final_heads = o.final_heads;
    a.layers = o.layers;
    a.edge_dropout = o.edge_dropout;
    return a;
}

TrainConfig train_config(const Options& o) {
    TrainConfig c;
    c.epochs = o.epochs;
    c.learning_rate = o.lr;
    c.optimizer = o.optimizer == "sgd" ? Optimizer::sgd : Optimizer::adam;
    c.seed = o.seed;
    c.replicate_count = o.replicates;
    c.validate();
    return c;
}

TargetKind target_kind(const std::string& s) {
    if (s == "logcpm") return TargetKind::logcpm;
    if (s == "8n") return TargetKind::smooth_8n;
    return TargetKind::spcs;
}

GraphVariant graph_variant(const std::string& s) {
    if (s == "one-hop") return GraphVariant::one_hop;
    if (s == "none") return GraphVariant::none;
    return GraphVariant::hierarchical;
}

PrepareOptions prepare_options(const Options& o) {
    PrepareOptions p;
    p.variant = graph_variant(o.graph);
    p.target = target_kind(o.target);
    p.cluster_size = o.cluster_size;
    p.seed = o.seed;
    p.spcs = o.spcs;
    p.spcs.validate();
    return p;
}

struct LoadedSample {
    STSample sample;
    EmbeddingMatrix embeddings;
};

/// All <id>.spots.tsv / .expr.tsv / .emb.tsv triples in a directory, sorted by id.
std::vector<LoadedSample> load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(dir.string() + ": not a directory");
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        constexpr std::string_view suffix = ".spots.tsv";
        if (name.size() > suffix.size() && name.ends_with(suffix))
            ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw Error(dir.string() + ": no <id>.spots.tsv files found");
    std::vector<LoadedSample> out;
    for (const auto& id : ids) {
        LoadedSample s;
        s.sample = load_sample(dir / (id + ".spots.tsv"), dir / (id + ".expr.tsv"));
        s.embeddings = load_embeddings(dir / (id + ".emb.tsv"), s.sample);
        out.push_back(std::move(s));
    }
    const auto& genes = out.front().sample.genes;
    const auto d = out.front().embeddings.dim();
    for (const auto& s : out) {
        if (s.sample.genes != genes)
            throw Error("sample '" + s.sample.sample_id + "': gene panel differs from '" + out.front().sample.sample_id + "'");
        if (s.embeddings.dim() != d)
            throw Error("sample '" + s.sample.sample_id + "': embedding dimension differs");
    }
    return out;
}

std::vector<GraphSample> prepare_all(const std::vector<LoadedSample>& data, const Options& o) {
    const auto p = prepare_options(o);
    std::vector<GraphSample> out;
    for (const auto& s : data) out.push_back(prepare_sample(s.sample, s.embeddings, p));
    return out;
}

/// Resolved option values of one subcommand as `key=value` lines.
std::string snapshot(const CLI::App& app) {
    std::ostringstream os;
    for (const auto* opt : app.get_options()) {
        const auto name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config" || name == "version") continue;
        std::string value;
        if (opt->count() > 0) {
            const auto res = opt->results();
            value = res.back();
        } else {
            value = opt->get_default_str();
        }
        if (opt->get_type_size() == 0 && value.empty()) value = "false";
        os << name << '=' << value << '\n';
    }
    return os.str();
}

void write_snapshot(const fs::path& dir, const CLI::App& app) {
    fs::create_directories(dir);
    std::ofstream(dir / kSnapshotName) << snapshot(app);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(path.string() + ": cannot open for writing");
    f << text;
}

json metrics_json(const MetricsReport& r) {
    json j;
    j["mse"] = r.mse;
    j["mae"] = r.mae;
    j["pcc"] = std::isnan(r.pcc) ? json(nullptr) : json(r.pcc);
    j["excluded_genes"] = r.excluded_genes;
    json genes = json::array();
    for (double v : r.per_gene_pcc) genes.push_back(std::isnan(v) ? json(nullptr) : json(v));
    j["per_gene_pcc"] = genes;
    return j;
}

std::vector<std::string> metrics_row(const std::string& id, const MetricsReport& r) {
    return {id, tsv::format_double(r.mse), tsv::format_double(r.mae), tsv::format_double(r.pcc),
            std::to_string(r.excluded_genes)};
}

const std::vector<std::string> kMetricsHeader{"sample_id", "mse", "mae", "pcc", "excluded_genes"};

void save_matrix(const fs::path& path, const STSample& sample, const Matrix& values) {
    save_expression(path, sample, values);
}

// ---- subcommands ---------------------------------------------------------

int run_ingest(const Options& o) {
    auto s = load_sample(o.spots, o.expr);
    json j;
    j["sample_id"] = s.sample_id;
    j["n_spots"] = s.n_spots();
    j["n_genes"] = s.n_genes();
    std::optional<EmbeddingMatrix> emb;
    if (!o.emb.empty()) {
        emb = load_embeddings(o.emb, s);
        j["embedding_dim"] = emb->dim();
    }
    if (!o.out.empty()) {
        const fs::path dir(o.out);
        save_spots(dir / (s.sample_id + ".spots.tsv"), s);
        save_expression(dir / (s.sample_id + ".expr.tsv"), s, s.expr_raw);
        if (emb) save_embeddings(dir / (s.sample_id + ".emb.tsv"), s, *emb);
        write_text(dir / (s.sample_id + ".ingest.json"), j.dump(2) + "\n");
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_smooth(const Options& o) {
    const auto s = load_sample(o.spots, o.expr);
    Matrix out;
    json meta;
    meta["sample_id"] = s.sample_id;
    meta["method"] = o.method;
    if (o.method == "8n") {
        out = smooth_8n(s, logcpm(s.expr_raw));
        meta["input"] = "logcpm";
    } else {
        o.spcs.validate();
        out = spcs_smooth(s, o.spcs);
        meta["input"] = "logcpm";
        meta["tau_s"] = o.spcs.tau_s;
        meta["tau_p"] = o.spcs.tau_p;
        meta["alpha"] = o.spcs.alpha;
        meta["beta"] = o.spcs.beta;
        meta["pca_dim"] = o.spcs.pca_dim;
    }
    save_matrix(o.out, s, out);
    write_text(o.out + ".meta.json", meta.dump(2) + "\n");
    return 0;
}

int run_cluster(const Options& o) {
    const auto s = load_sample(o.spots, o.expr);
    const auto emb = load_embeddings(o.emb, s);
    const auto sp = cluster_spatial(s, emb, o.cluster_size, o.seed);
    const auto fe = cluster_feature(emb, o.cluster_size, o.seed);
    std::vector<std::vector<std::string>> rows;
    std::set<std::size_t> sc(sp.centroid_spot.begin(), sp.centroid_spot.end());
    std::set<std::size_t> fc(fe.centroid_spot.begin(), fe.centroid_spot.end());
    for (std::size_t i = 0; i < s.n_spots(); ++i)
        rows.push_back({s.spots[i].spot_id, std::to_string(sp.assignments[i]), std::to_string(fe.assignments[i]),
                        sc.count(i) ? "1" : "0", fc.count(i) ? "1" : "0"});
    tsv::write(o.out, {"spot_id", "spatial_cluster", "feature_cluster", "is_spatial_centroid", "is_feature_centroid"},
               rows);
    if (sp.degenerate || fe.degenerate) log::warn("clustering is degenerate (fewer distinct means than clusters)");
    return 0;
}

json graph_summary(const HierGraph& g) {
    json j;
    j["n_nodes"] = g.n_nodes;
    j["edges"] = g.edges.size();
    for (auto k : {EdgeKind::internal_spatial, EdgeKind::internal_feature, EdgeKind::shortcut, EdgeKind::one_hop})
        j[std::string(edge_kind_name(k))] = g.count(k);
    j["message_pairs"] = message_pairs(g).size();
    const auto hop = max_hop_distance(
        g, KindMask::of({EdgeKind::internal_spatial, EdgeKind::internal_feature, EdgeKind::shortcut}));
    j["max_hop_internal_shortcut"] = hop == kUnreachable ? json(nullptr) : json(hop);
    return j;
}

HierGraph build_graph(const STSample& s, const EmbeddingMatrix& emb, const Options& o) {
    if (o.graph == "hierarchical")
        return assemble(s, cluster_spatial(s, emb, o.cluster_size, o.seed), cluster_feature(emb, o.cluster_size, o.seed));
    if (o.graph == "one-hop") return assemble_one_hop(s);
    HierGraph g;
    g.n_nodes = s.n_spots();
    return g;
}

int run_build_graph(const Options& o) {
    const auto s = load_sample(o.spots, o.expr);
    const auto emb = load_embeddings(o.emb, s);
    const auto g = build_graph(s, emb, o);
    export_edges(o.out, g);
    const auto summary = graph_summary(g);
    write_text(o.out + ".summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return 0;
}

void write_loss_curve(const fs::path& path, const std::vector<double>& curve) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < curve.size(); ++e) rows.push_back({std::to_string(e), tsv::format_double(curve[e])});
    tsv::write(path, {"epoch", "loss"}, rows);
}

int run_train(const Options& o, const CLI::App& app) {
    const auto data = load_dir(o.data);
    const auto samples = prepare_all(data, o);
    const fs::path out(o.out);
    write_snapshot(out, app);
    const auto arch = architecture(o, samples.front().features.cols(), samples.front().targets.cols());
    const auto result = train(arch, samples, {}, train_config(o));
    save_checkpoint(out / "model.ckpt", result.model);
    write_loss_curve(out / "loss_curve.tsv", result.loss_curve);
    json j;
    j["best_replicate"] = result.best_replicate;
    j["replicate_mse"] = result.replicate_scores;
    j["final_loss"] = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
    write_text(out / "train.json", j.dump(2) + "\n");
    log::info("trained on " + std::to_string(samples.size()) + " samples; checkpoint " + (out / "model.ckpt").string());
    return 0;
}

/// Predicts every sample, writes predictions and metrics; returns the mean report.
MetricsReport evaluate(const std::vector<LoadedSample>& data, const std::vector<GraphSample>& samples,
                       const GatModel& model, const fs::path& out) {
    std::vector<std::vector<std::string>> rows;
    std::vector<MetricsReport> reports;
    json per = json::object();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto pred = predict(model, samples[i]);
        save_matrix(out / "predictions" / (samples[i].sample_id + ".tsv"), data[i].sample, pred);
        reports.push_back(compute_metrics(pred, samples[i].targets));
        rows.push_back(metrics_row(samples[i].sample_id, reports.back()));
        per[samples[i].sample_id] = metrics_json(reports.back());
    }
    const auto mean = average(reports);
    rows.push_back(metrics_row("mean", mean));
    tsv::write(out / "metrics.tsv", kMetricsHeader, rows);
    json j;
    j["mean"] = metrics_json(mean);
    j["samples"] = per;
    write_text(out / "metrics.json", j.dump(2) + "\n");
    return mean;
}

int run_eval(const Options& o, const CLI::App& app) {
    const auto data = load_dir(o.data);
    const auto samples = prepare_all(data, o);
    const auto model = load_checkpoint(o.model);
    if (model.in_dim() != samples.front().features.cols() || model.out_dim() != samples.front().targets.cols())
        throw Error("checkpoint dimensions do not match the data (in " + std::to_string(model.in_dim()) + ", out " +
                    std::to_string(model.out_dim()) + ")");
    const fs::path out(o.out);
    write_snapshot(out, app);
    const auto mean = evaluate(data, samples, model, out);
    std::cout << metrics_json(mean)["pcc"].dump() << '\n';
    return 0;
}

CvReport run_cv_core(const std::vector<GraphSample>& samples, const Options& o, const fs::path& out) {
    Learner learner;
    if (o.baseline) {
        learner = linear_learner(o.ridge);
    } else {
        const auto arch = architecture(o, samples.front().features.cols(), samples.front().targets.cols());
        learner = gat_learner(arch, train_config(o));
    }
    const auto report = cross_validate(samples, o.folds, o.seed, learner);
    std::vector<std::vector<std::string>> rows, assign;
    json folds = json::array();
    for (const auto& f : report.folds) {
        auto r = metrics_row("fold" + std::to_string(f.fold), f.metrics);
        rows.push_back(std::move(r));
        json jf = metrics_json(f.metrics);
        jf["fold"] = f.fold;
        jf["test_ids"] = f.test_ids;
        folds.push_back(jf);
        for (const auto& id : f.test_ids) assign.push_back({id, std::to_string(f.fold)});
    }
    rows.push_back(metrics_row("mean", report.mean));
    std::sort(assign.begin(), assign.end());
    tsv::write(out / "cv_metrics.tsv", kMetricsHeader, rows);
    tsv::write(out / "cv_folds.tsv", {"sample_id", "fold"}, assign);
    json j;
    j["folds"] = folds;
    j["mean"] = metrics_json(report.mean);
    write_text(out / "cv_report.json", j.dump(2) + "\n");
    return report;
}

int run_cv(const Options& o, const CLI::App& app) {
    const auto data = load_dir(o.data);
    if (data.size() < static_cast<std::size_t>(o.folds))
        throw Error("fewer samples than folds (" + std::to_string(data.size()) + " < " + std::to_string(o.folds) + ")");
    const auto samples = prepare_all(data, o);
    const fs::path out(o.out);
    write_snapshot(out, app);
    const auto report = run_cv_core(samples, o, out);
    std::cout << metrics_json(report.mean)["pcc"].dump() << '\n';
    return 0;
}

int run_heatmap(const Options& o, const CLI::App& app) {
    const auto data = load_dir(o.data);
    const auto model = load_checkpoint(o.model);
    const auto it = std::find_if(data.begin(), data.end(), [&](const auto& s) { return s.sample.sample_id == o.sample; });
    if (it == data.end()) throw Error("sample '" + o.sample + "' not found in " + o.data);
    const auto gs = prepare_sample(it->sample, it->embeddings, prepare_options(o));
    const fs::path prefix(o.out);
    if (prefix.has_parent_path()) write_snapshot(prefix.parent_path(), app);
    const auto files = heatmap_export(it->sample, o.gene, predict(model, gs), gs.targets, prefix);
    std::cout << tsv::format_double(files.pcc) << '\n';
    return 0;
}

int run_synth(const Options& o, const CLI::App& app) {
    const fs::path out(o.out);
    write_snapshot(out, app);
    auto spec = o.synth;
    spec.prototype_seed = spec.prototype_seed ? spec.prototype_seed : o.seed;
    for (int k = 0; k < o.count; ++k) {
        spec.seed = derive_seed({o.seed, static_cast<std::uint64_t>(k)});
        if (o.count == 1) spec.seed = o.seed;
        const std::string id = o.count == 1 ? o.prefix : o.prefix + std::to_string(k);
        write_synth(out, generate(spec, id));
    }
    return 0;
}

int run_pipeline(const Options& o, const CLI::App& app) {
    const fs::path out(o.out);
    write_snapshot(out, app);
    const auto data = load_dir(o.data);

    std::vector<std::vector<std::string>> ingest_rows;
    for (const auto& s : data)
        ingest_rows.push_back({s.sample.sample_id, std::to_string(s.sample.n_spots()), std::to_string(s.sample.n_genes()),
                               std::to_string(s.embeddings.dim())});
    tsv::write(out / "ingest.tsv", {"sample_id", "n_spots", "n_genes", "embedding_dim"}, ingest_rows);

    const auto samples = prepare_all(data, o);
    json graphs = json::object();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data[i];
        save_matrix(out / "targets" / (s.sample.sample_id + ".tsv"), s.sample, samples[i].targets);
        const auto g = build_graph(s.sample, s.embeddings, o);
        export_edges(out / "graphs" / (s.sample.sample_id + ".edges.tsv"), g);
        graphs[s.sample.sample_id] = graph_summary(g);
    }
    write_text(out / "graphs" / "summary.json", graphs.dump(2) + "\n");

    const auto arch = architecture(o, samples.front().features.cols(), samples.front().targets.cols());
    const auto result = train(arch, samples, {}, train_config(o));
    save_checkpoint(out / "model.ckpt", result.model);
    write_loss_curve(out / "loss_curve.tsv", result.loss_curve);
    evaluate(data, samples, result.model, out);

    if (o.folds > 0) {
        if (samples.size() < static_cast<std::size_t>(o.folds))
            log::warn("skipping cross-validation: fewer samples than folds (" + std::to_string(samples.size()) + " < " +
                      std::to_string(o.folds) + ")");
        else
            run_cv_core(samples, o, out);
    }

    const auto& first = data.front().sample;
    const std::string gene = o.gene.empty() ? first.genes.front() : o.gene;
    heatmap_export(first, gene, predict(result.model, samples.front()), samples.front().targets, out / "heatmap");
    return 0;
}

// ---- config handling ------------------------------------------------------

/// Flat `key = value` file; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(path.string() + ": cannot open config file");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int n = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(n) + ": expected key=value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

std::string build_info() {
    std::ostringstream os;
    os << "merge " << MERGE_VERSION << "\ncompiler: "
#if defined(__clang__)
       << "clang " << __clang_version__
#elif defined(__GNUC__)
       << "gcc " << __VERSION__
#endif
       << "\nsimd: " << simd::backend_name(simd::active().backend)
       << (simd::avx2_table() ? " (avx2 available)" : " (avx2 unavailable)") << "\ndefault seed: " << kDefaultSeed;
    return os.str();
}

} // namespace

int dispatch(int argc, char** argv) {
    Options o;
    CLI::App app{"Spatial gene-expression prediction on hierarchical spot graphs", "merge"};
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", build_info());
    app.add_option("--simd", o.simd, "kernel backend")->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    app.add_flag_function("-v,--verbose", [](std::int64_t) { log::set_level(log::Level::info); }, "progress messages");
    app.add_flag_function("-q,--quiet", [](std::int64_t) { log::set_level(log::Level::quiet); }, "suppress warnings");

    std::map<std::string, CLI::App*> subs;
    auto sub = [&](const std::string& name, const std::string& desc) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("--config", "flat key=value file; flags on the command line take precedence");
        subs[name] = s;
        return s;
    };

    auto* ingest = sub("ingest", "validate a spot/expression(/embedding) triple and optionally copy it canonically");
    add_sample_files(ingest, o, false);
    ingest->add_option("--out", o.out, "output directory");

    auto* smooth = sub("smooth", "logCPM-normalise and smooth an expression table");
    add_sample_files(smooth, o, false);
    smooth->add_option("--method", o.method, "smoothing method")->check(CLI::IsMember({"8n", "spcs"}));
    add_smoothing(smooth, o);
    smooth->add_option("--out", o.out, "output TSV (a .meta.json sidecar is written next to it)")->required();

    auto* cluster = sub("cluster", "spatial and feature k-means with centroid spots");
    add_sample_files(cluster, o, true);
    cluster->add_option("--size", o.cluster_size, "target spots per cluster");
    cluster->add_option("--seed", o.seed, "random seed");
    cluster->add_option("--out", o.out, "output assignments TSV")->required();

    auto* bg = sub("build-graph", "assemble the hierarchical (or one-hop) graph and export its edges");
    add_sample_files(bg, o, true);
    add_graph(bg, o);
    bg->add_option("--out", o.out, "output edge TSV (a .summary.json is written next to it)")->required();

    auto add_data = [&](CLI::App* s) {
        s->add_option("--data", o.data, "directory of <id>.spots.tsv/.expr.tsv/.emb.tsv triples")->required();
        s->add_option("--out", o.out, "output directory")->required();
        add_graph(s, o);
        add_target(s, o);
    };

    auto* tr = sub("train", "train the graph attention network on every sample in a directory");
    add_data(tr);
    add_model(tr, o);

    auto* ev = sub("eval", "predict with a checkpoint and report MSE/MAE/PCC");
    add_data(ev);
    ev->add_option("--model", o.model, "checkpoint file")->required();

    auto* cv = sub("cv", "slide-level k-fold cross-validation");
    add_data(cv);
    add_model(cv, o);
    cv->add_option("--folds", o.folds, "number of folds");
    cv->add_flag("--baseline", o.baseline, "use the graph-free linear baseline instead of the network");
    cv->add_option("--ridge", o.ridge, "ridge penalty of the linear baseline");

    auto* hm = sub("heatmap", "export truth/prediction heatmaps for one gene");
    hm->add_option("--data", o.data, "data directory")->required();
    hm->add_option("--model", o.model, "checkpoint file")->required();
    hm->add_option("--sample", o.sample, "sample id")->required();
    hm->add_option("--gene", o.gene, "gene name")->required();
    hm->add_option("--out", o.out, "output prefix (<prefix>.tsv and <prefix>.ppm)")->required();
    add_graph(hm, o);
    add_target(hm, o);

    auto* sy = sub("synth", "generate synthetic slides with planted regions");
    sy->add_option("--rows", o.synth.grid_rows, "grid rows");
    sy->add_option("--cols", o.synth.grid_cols, "grid columns");
    sy->add_option("--regions", o.synth.n_regions, "planted regions");
    sy->add_option("--genes-per-region", o.synth.genes_per_region, "signature genes per region");
    sy->add_option("--embedding-dim", o.synth.embedding_dim, "embedding dimension");
    sy->add_option("--noise", o.synth.noise_sigma, "Gaussian expression noise sigma");
    sy->add_option("--dropout", o.synth.dropout_rate, "probability an expression entry is zeroed");
    sy->add_option("--embedding-noise", o.synth.embedding_noise, "per-spot embedding noise");
    sy->add_option("--batch-shift", o.synth.batch_shift, "per-slide embedding offset scale");
    sy->add_option("--seed", o.seed, "random seed");
    sy->add_option("--count", o.count, "number of slides");
    sy->add_option("--prefix", o.prefix, "sample id prefix");
    sy->add_option("--out", o.out, "output directory")->required();

    auto* pl = sub("pipeline", "ingest, smooth, cluster, build graphs, train, evaluate, cross-validate, export heatmap");
    add_data(pl);
    add_model(pl, o);
    pl->add_option("--folds", o.folds, "cross-validation folds (0 disables)");
    pl->add_option("--gene", o.gene, "heatmap gene (default: first gene)");

    // Splice config entries in front of the user's flags so the flags win.
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        const auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) {
            return a == "--config" || a.starts_with("--config=");
        });
        const auto sub_it = std::find_if(args.begin(), args.end(), [&](const std::string& a) { return subs.count(a) > 0; });
        if (it != args.end() && sub_it != args.end() && sub_it < it) {
            const auto sub_pos = static_cast<std::size_t>(sub_it - args.begin());
            std::string path;
            const auto pos = static_cast<std::size_t>(it - args.begin());
            if (*it == "--config") {
                if (pos + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file");
                path = args[pos + 1];
                args.erase(it, it + 2);
            } else {
                path = it->substr(9);
                args.erase(it);
            }
            std::vector<std::string> spliced(args.begin(), args.begin() + static_cast<long>(sub_pos) + 1);
            auto* target = subs[args[sub_pos]];
            for (const auto& [key, value] : read_config(path)) {
                if (target->get_option_no_throw("--" + key) == nullptr) {
                    bool known = false;
                    for (const auto& entry : subs) known |= entry.second->get_option_no_throw("--" + key) != nullptr;
                    if (!known) throw CLI::ExtrasError("unknown config key '" + key + "' in " + path, CLI::ExitCodes::ExtrasError);
                    continue;
                }
                const auto* opt = target->get_option("--" + key);
                if (opt->get_type_size() == 0) {
                    if (value == "true" || value == "1") spliced.push_back("--" + key);
                    else if (value != "false" && value != "0") throw CLI::ConversionError("--" + key, value);
                } else {
                    spliced.push_back("--" + key);
                    spliced.push_back(value);
                }
            }
            spliced.insert(spliced.end(), args.begin() + static_cast<long>(sub_pos) + 1, args.end());
            args = std::move(spliced);
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << active->help();
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (o.simd == "scalar") simd::set_backend(simd::Backend::scalar);
        else if (o.simd == "avx2") simd::set_backend(simd::Backend::avx2);

        auto* active = app.get_subcommands().front();
        const auto name = active->get_name();
        if (name == "ingest") return run_ingest(o);
        if (name == "smooth") return run_smooth(o);
        if (name == "cluster") return run_cluster(o);
        if (name == "build-graph") return run_build_graph(o);
        if (name == "train") return run_train(o, *active);
        if (name == "eval") return run_eval(o, *active);
        if (name == "cv") return run_cv(o, *active);
        if (name == "heatmap") return run_heatmap(o, *active);
        if (name == "synth") return run_synth(o, *active);
        if (name == "pipeline") return run_pipeline(o, *active);
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace merge::cli
