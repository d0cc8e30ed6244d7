#include "bipembed/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bipembed/algdist.hpp"
#include "bipembed/combiner.hpp"
#include "bipembed/error.hpp"
#include "bipembed/graph.hpp"
#include "bipembed/sampler.hpp"
#include "bipembed/trainer.hpp"
#include "text_util.hpp"

namespace bipembed {

namespace {

const char* const kCommands[] = {"ingest",  "algdist",  "sample",  "embed",
                                 "combine", "eval-link", "eval-rec", "sweep"};

bool needs_edges(const std::string& cmd) { return cmd != "eval-rec"; }

std::string range_msg(const std::string& flag, const std::string& range, double value) {
    return flag + " must lie in " + range + ", got " + detail::format_double(value);
}

}  // namespace

std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> v;
    namespace fs = std::filesystem;
    if (!(c.damping > 0.0 && c.damping < 1.0)) v.push_back(range_msg("--lambda", "(0, 1)", c.damping));
    for (const double h : c.holdouts)
        if (!(h >= 0.0 && h <= 1.0)) v.push_back(range_msg("--h", "[0, 1]", h));
    if (!(c.sweep_holdout >= 0.0 && c.sweep_holdout <= 1.0))
        v.push_back(range_msg("--sweep-h", "[0, 1]", c.sweep_holdout));
    if (!(c.rec_holdout >= 0.0 && c.rec_holdout <= 1.0))
        v.push_back(range_msg("--rec-holdout", "[0, 1]", c.rec_holdout));
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) v.push_back(range_msg("--dropout", "[0, 1)", c.dropout));
    if (!(c.negative_ratio >= 0.0)) v.push_back(range_msg("--neg-ratio", "[0, inf)", c.negative_ratio));
    if (!(c.learning_rate > 0.0)) v.push_back(range_msg("--lr", "(0, inf)", c.learning_rate));
    if (!(c.combiner_lr > 0.0)) v.push_back(range_msg("--combiner-lr", "(0, inf)", c.combiner_lr));
    if (!(c.mlp_lr > 0.0)) v.push_back(range_msg("--mlp-lr", "(0, inf)", c.mlp_lr));
    if (!(c.svm_c > 0.0)) v.push_back(range_msg("--svm-c", "(0, inf)", c.svm_c));
    if (!(c.svm_gamma > 0.0)) v.push_back(range_msg("--svm-gamma", "(0, inf)", c.svm_gamma));
    auto at_least_one = [&](const char* flag, std::size_t x) {
        if (x < 1) v.push_back(std::string(flag) + " must be at least 1");
    };
    at_least_one("--dim", c.dimension);
    at_least_one("--samples-per-node", c.samples_per_node);
    at_least_one("--gamma-size", c.gamma_size);
    at_least_one("--trials", c.trials);
    at_least_one("--combined-dim", c.combined_dim);
    at_least_one("--batch", c.batch_size);
    at_least_one("--k", c.k);
    at_least_one("--sweep-trials", c.sweep_trials);
    at_least_one("--threads", c.threads);
    for (const auto sr : c.sweep_grid) at_least_one("--sweep-grid", sr);
    if (c.holdouts.empty()) v.push_back("--h needs at least one value");
    if (c.seeds.empty()) v.push_back("--seeds needs at least one value");
    if (c.khop != "walk" && c.khop != "set") v.push_back("--khop must be walk or set, got " + c.khop);
    if (c.gain != "linear" && c.gain != "exp") v.push_back("--gain must be linear or exp, got " + c.gain);
    if (!parse_method(c.method)) v.push_back("--method: unknown method '" + c.method + "'");
    for (const auto& m : c.methods)
        if (!parse_method(m)) v.push_back("--methods: unknown method '" + m + "'");

    auto must_exist = [&](const char* flag, const std::string& path) {
        if (path.empty()) v.push_back(std::string(flag) + " is required for " + c.command);
        else if (!fs::exists(path)) v.push_back(std::string(flag) + ": no such file '" + path + "'");
    };
    if (!c.command.empty()) {
        if (needs_edges(c.command)) must_exist("--edges", c.edges);
        if (c.command == "eval-rec") must_exist("--ratings", c.ratings);
        if (c.command == "combine") {
            if (c.embeddings.empty()) v.push_back("--embeddings is required for combine");
            for (const auto& e : c.embeddings) must_exist("--embeddings", e);
        }
        if (c.out.empty()) v.push_back("--out is required for " + c.command);
        if (c.command == "ingest" && !c.split.empty() && c.holdouts.size() != 1)
            v.push_back("--h must be a single value when ingest writes a split");
    }
    return v;
}

PipelineConfig pipeline_config(const RunConfig& c) {
    PipelineConfig p;
    p.threads = c.threads;
    p.sampler.samples_per_node = c.samples_per_node;
    p.sampler.gamma_size = c.gamma_size;
    p.sampler.negative_ratio = c.negative_ratio;
    p.sampler.khop = c.khop == "set" ? KhopMode::UniformSet : KhopMode::Walk;
    p.jor.trials = c.trials;
    p.jor.iterations = c.iterations;
    p.jor.damping = c.damping;
    p.train.dimension = c.dimension;
    p.train.epochs = c.epochs;
    p.train.learning_rate = c.learning_rate;
    p.train.batch_size = c.batch_size;
    p.combiner.combined_dim = c.combined_dim;
    p.combiner.dropout = c.dropout;
    p.combiner.epochs = c.epochs;
    p.combiner.learning_rate = c.combiner_lr;
    p.combiner.batch_size = c.batch_size;
    p.printed_kl = c.printed_kl;
    return seeded(p, c.seed);
}

LinkEvalParams link_params(const RunConfig& c) {
    LinkEvalParams p;
    p.svm.c = c.svm_c;
    p.svm.gamma = c.svm_gamma;
    p.unified.epochs = c.mlp_epochs;
    p.unified.learning_rate = c.mlp_lr;
    p.threads = c.threads;
    return p;
}

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}

BipartiteGraph read_graph(const RunConfig& c) {
    auto in = open_in(c.edges);
    return load_edge_list(in);
}

std::vector<EmbeddingMethod> methods_of(const RunConfig& c) {
    std::vector<EmbeddingMethod> out;
    for (const auto& m : c.methods) out.push_back(*parse_method(m));
    return out;
}

void write_trace(const std::string& path, const std::vector<double>& trace) {
    auto out = open_out(path);
    write_loss_trace(out, trace);
}

int run_ingest(const RunConfig& c, std::ostream& err) {
    BipartiteGraph g = read_graph(c);
    if (c.min_degree > 0) g = degree_prune(g, c.min_degree);
    {
        auto out = open_out(c.out);
        write_edge_list(out, g);
    }
    err << "ingest: " << g.nodes_a() << " + " << g.nodes_b() << " nodes, " << g.edge_count()
        << " edges\n";
    if (!c.split.empty()) {
        const auto split = holdout_split(g, c.holdouts.front(), c.seed);
        auto out = open_out(c.split);
        write_split_manifest(out, split);
        err << "ingest: held out " << split.removed_edges.size() << " edges\n";
    }
    return 0;
}

int run_algdist(const RunConfig& c, std::ostream&) {
    const auto g = read_graph(c);
    const auto p = pipeline_config(c);
    const auto coords = jor_relax(g, p.jor, p.threads);
    auto out = open_out(c.out);
    write_coordinates(out, g, coords);
    return 0;
}

SampleSet sample_for(const BipartiteGraph& g, EmbeddingMethod m, const PipelineConfig& p) {
    if (m == EmbeddingMethod::Fobe) return fobe_sample(g, p.sampler);
    const auto coords = jor_relax(g, p.jor, p.threads);
    return hobe_sample(g, edge_similarities(g, coords), p.sampler);
}

int run_sample(const RunConfig& c, std::ostream& err) {
    const auto method = *parse_method(c.method);
    if (method != EmbeddingMethod::Fobe && method != EmbeddingMethod::Hobe)
        throw ParameterError("sample supports fobe and hobe only");
    const auto g = read_graph(c);
    const auto samples = sample_for(g, method, pipeline_config(c));
    auto out = open_out(c.out);
    write_samples(out, g, samples);
    err << "sample: " << samples.records().size() << " records\n";
    return 0;
}

int run_embed(const RunConfig& c, std::ostream& err) {
    const auto method = *parse_method(c.method);
    const auto g = read_graph(c);
    const auto p = pipeline_config(c);
    EmbeddingTable table;
    if (method == EmbeddingMethod::Fobe || method == EmbeddingMethod::Hobe) {
        const auto samples = sample_for(g, method, p);
        TrainConfig tc = p.train;
        if (method == EmbeddingMethod::Hobe) {
            tc.loss = LossKind::HobeMse;
            tc.seed = derive_seed(p.train.seed, 1);
        } else {
            tc.loss = p.printed_kl ? LossKind::FobeKlPrinted : LossKind::FobeKl;
        }
        auto result = train(samples, g, tc);
        if (!c.loss_trace.empty()) write_trace(c.loss_trace, result.loss_trace);
        err << "embed: final loss " << detail::format_double(result.loss_trace.back()) << '\n';
        table = std::move(result.table);
    } else {
        table = embed(g, method, p);
    }
    auto out = open_out(c.out);
    write_embeddings(out, table);
    return 0;
}

int run_combine(const RunConfig& c, std::ostream& err) {
    const auto g = read_graph(c);
    std::vector<EmbeddingTable> tables;
    for (const auto& path : c.embeddings) {
        auto in = open_in(path);
        tables.push_back(read_embeddings(in));
    }
    const auto method = *parse_method(c.method);
    CombinerConfig cc = pipeline_config(c).combiner;
    cc.mode = method == EmbeddingMethod::CombineAutoreg ? CombineMode::AutoRegularized
                                                        : CombineMode::Direct;
    const auto result = train_combiner(tables, g, cc);
    if (result.negative_shortfall > 0)
        err << "warning: " << result.negative_shortfall
            << " combiner negatives unavailable (graph too dense)\n";
    {
        auto out = open_out(c.out);
        write_embeddings(out, result.combined);
    }
    if (!c.checkpoint.empty()) {
        auto out = open_out(c.checkpoint);
        write_combiner(out, result.model);
    }
    if (!c.loss_trace.empty()) {
        auto out = open_out(c.loss_trace);
        out << "epoch,total,link,reconstruction\n";
        for (std::size_t e = 0; e < result.trace.size(); ++e) {
            const auto& l = result.trace[e];
            out << e << ',' << detail::format_double(l.total) << ','
                << detail::format_double(l.link) << ',' << detail::format_double(l.reconstruction)
                << '\n';
        }
    }
    return 0;
}

int finish_report(const RunConfig& c, const EvalReport& report, std::ostream& err) {
    {
        auto out = open_out(c.out);
        write_report(out, report);
    }
    for (const auto& [key, mean] : report.means())
        err << key.method << ' ' << to_string(key.task) << ' ' << detail::format_double(key.h_or_k)
            << ' ' << key.metric << ' ' << std::fixed << std::setprecision(4) << mean
            << std::defaultfloat << '\n';
    int status = 0;
    for (const auto& e : report.entries) {
        if (e.valid) continue;
        err << "error: " << e.method << ' ' << to_string(e.task) << " h="
            << detail::format_double(e.h_or_k) << " seed=" << e.seed << ": " << e.message << '\n';
        status = 1;
    }
    return status;
}

int run_eval_link(const RunConfig& c, std::ostream& err) {
    const auto g = read_graph(c);
    const auto methods = methods_of(c);
    const auto report =
        run_link_experiment(g, methods, c.holdouts, c.seeds, pipeline_config(c), link_params(c));
    return finish_report(c, report, err);
}

int run_eval_rec(const RunConfig& c, std::ostream& err) {
    auto in = open_in(c.ratings);
    const auto ratings = load_rating_list(in, c.log_scale);
    const auto methods = methods_of(c);
    RecParams rp;
    rp.holdout = c.rec_holdout;
    rp.k = c.k;
    rp.gain = c.gain == "exp" ? GainMode::Exponential : GainMode::Linear;
    rp.threads = c.threads;
    PipelineConfig pc = pipeline_config(c);
    const auto report = run_rec_experiment(ratings, methods, c.seed, pc, rp);
    return finish_report(c, report, err);
}

int run_sweep_cmd(const RunConfig& c, std::ostream& err) {
    const auto g = read_graph(c);
    const auto report = run_sweep(g, *parse_method(c.method), c.sweep_grid, c.sweep_trials,
                                  c.sweep_holdout, c.seed, pipeline_config(c), link_params(c));
    return finish_report(c, report, err);
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

/// Applies config-file values to options not given on the command line.
void apply_config_file(CLI::App& app, const std::string& path) {
    auto in = open_in(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ValidationError("--config", "top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        CLI::Option* opt = app.get_option_no_throw("--" + key);
        if (!opt || key == "config") throw CLI::ExtrasError({"config key '" + key + "'"});
        if (opt->count() > 0) continue;
        if (value.is_array()) {
            for (const auto& item : value) opt->add_result(json_scalar(item));
        } else {
            opt->add_result(json_scalar(value));
        }
        opt->run_callback();
    }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Bipartite graph embedding toolkit", "bipembed"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1, 1);

    app.add_option("--edges", c.edges, "Edge list: a_id<TAB>b_id[<TAB>weight]");
    app.add_option("--ratings", c.ratings, "Rating list: user<TAB>item<TAB>rating");
    app.add_option("--out", c.out, "Output file");
    app.add_option("--split", c.split, "Split manifest written by ingest");
    app.add_option("--embeddings", c.embeddings, "Embedding files to combine");
    app.add_option("--loss-trace", c.loss_trace, "Per-epoch loss CSV");
    app.add_option("--checkpoint", c.checkpoint, "Combiner checkpoint file");
    app.add_option("--config", c.config_file, "JSON file of flag values; flags override it");

    app.add_option("--method", c.method, "fobe | hobe | direct | autoreg");
    app.add_option("--methods", c.methods, "Methods evaluated by eval-link / eval-rec");
    app.add_option("--dim", c.dimension, "Embedding dimension r");
    app.add_option("--samples-per-node", c.samples_per_node, "Sampling rounds per node s_r");
    app.add_option("--gamma-size", c.gamma_size, "Neighborhood draws per cross record s_gamma");
    app.add_option("--neg-ratio", c.negative_ratio, "Negatives per positive nu");
    app.add_option("--trials", c.trials, "Algebraic distance test vectors R");
    app.add_option("--iterations", c.iterations, "JOR iterations K");
    app.add_option("--lambda", c.damping, "JOR damping");
    app.add_option("--combined-dim", c.combined_dim, "Combined embedding dimension k'");
    app.add_option("--dropout", c.dropout, "Combiner input dropout");
    app.add_option("--epochs", c.epochs, "Training epochs");
    app.add_option("--lr", c.learning_rate, "Embedding Adagrad learning rate");
    app.add_option("--combiner-lr", c.combiner_lr, "Combiner Adagrad learning rate");
    app.add_option("--batch", c.batch_size, "Mini-batch size");
    app.add_option("--khop", c.khop, "k-hop draw: walk | set");
    app.add_flag("--printed-kl", c.printed_kl, "FOBE loss p*log(t/p) instead of KL(t||p)");

    app.add_option("--h", c.holdouts, "Holdout ratios");
    app.add_option("--seeds", c.seeds, "Seeds of eval-link runs");
    app.add_option("--svm-c", c.svm_c, "Personalized SVM C");
    app.add_option("--svm-gamma", c.svm_gamma, "Personalized SVM kernel width");
    app.add_option("--mlp-epochs", c.mlp_epochs, "Unified classifier epochs");
    app.add_option("--mlp-lr", c.mlp_lr, "Unified classifier learning rate");

    app.add_flag("--log-scale", c.log_scale, "Ratings become log(1 + rating)");
    app.add_option("--min-degree", c.min_degree, "Prune nodes below this degree at ingest");
    app.add_option("--k", c.k, "Recommendation cutoff");
    app.add_option("--rec-holdout", c.rec_holdout, "Recommendation test fraction");
    app.add_option("--gain", c.gain, "NDCG gain: linear | exp");

    app.add_option("--sweep-grid", c.sweep_grid, "Samples per node values of sweep");
    app.add_option("--sweep-trials", c.sweep_trials, "Trials per sweep value");
    app.add_option("--sweep-h", c.sweep_holdout, "Sweep holdout ratio");

    app.add_option("--seed", c.seed, "Seed of all randomness");
    app.add_option("--threads", c.threads, "Worker threads (1 is bit-reproducible)");

    const char* const help[] = {
        "Normalize an edge list; with --split also write a holdout manifest",
        "Relax algebraic distance coordinates",
        "Write FOBE or HOBE training records",
        "Train an embedding",
        "Combine pre-trained embeddings",
        "Link prediction experiment over --h and --seeds",
        "Recommendation experiment",
        "Accuracy versus samples per node",
    };
    for (std::size_t i = 0; i < std::size(kCommands); ++i)
        app.add_subcommand(kCommands[i], help[i])->fallthrough();

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
        app.parse(args);
        if (!c.config_file.empty()) apply_config_file(app, c.config_file);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    c.command = app.get_subcommands().front()->get_name();

    const auto violations = validate_config(c);
    if (!violations.empty()) {
        for (const auto& v : violations) err << "error: " << v << '\n';
        return 2;
    }

    try {
        if (c.command == "ingest") return run_ingest(c, err);
        if (c.command == "algdist") return run_algdist(c, err);
        if (c.command == "sample") return run_sample(c, err);
        if (c.command == "embed") return run_embed(c, err);
        if (c.command == "combine") return run_combine(c, err);
        if (c.command == "eval-link") return run_eval_link(c, err);
        if (c.command == "eval-rec") return run_eval_rec(c, err);
        return run_sweep_cmd(c, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace bipembed
