#include "bipembed/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bipembed/error.hpp"
#include "bipembed/nn.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace bipembed {

std::string_view to_string(EvalTask t) noexcept {
    switch (t) {
        case EvalTask::APersonalized: return "a_personalized";
        case EvalTask::BPersonalized: return "b_personalized";
        case EvalTask::Unified: return "unified";
        case EvalTask::Recommend: return "recommend";
    }
    return "?";
}

BipartiteGraph original_graph(const HoldoutSplit& split) {
    std::vector<Edge> edges = split.training_graph.edges();
    edges.insert(edges.end(), split.removed_edges.begin(), split.removed_edges.end());
    return with_edges(split.training_graph, std::move(edges));
}

namespace {

std::vector<std::size_t> row_index(const BipartiteGraph& g, const EmbeddingTable& embedding) {
    std::vector<std::size_t> rows(g.vertex_count());
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const auto r = embedding.row_of(g, v);
        if (!r) throw LookupError("node '" + g.name(v) + "' missing from embedding");
        rows[v] = *r;
    }
    return rows;
}

/// Opposite-part vertices of v that are not in `sorted_exclude`.
std::vector<Vertex> non_neighbors(const BipartiteGraph& g, Vertex v,
                                  std::span<const Vertex> sorted_exclude) {
    const Part q = other(g.part_of(v));
    std::vector<Vertex> out;
    std::size_t k = 0;
    for (Vertex u = g.part_begin(q); u < g.part_end(q); ++u) {
        while (k < sorted_exclude.size() && sorted_exclude[k] < u) ++k;
        if (k < sorted_exclude.size() && sorted_exclude[k] == u) continue;
        out.push_back(u);
    }
    return out;
}

std::optional<double> personalized_node(const BipartiteGraph& tg, const EmbeddingTable& embedding,
                                        std::span<const std::size_t> rows, Vertex v,
                                        std::span<const Vertex> held, const LinkEvalParams& params) {
    const auto train_nbrs = tg.neighbors(v);
    std::vector<Vertex> original(train_nbrs.begin(), train_nbrs.end());
    original.insert(original.end(), held.begin(), held.end());
    std::sort(original.begin(), original.end());

    auto pool = non_neighbors(tg, v, original);
    const std::size_t test_count = held.size();
    const std::size_t want =
        std::min(pool.size(), params.negatives_per_positive * train_nbrs.size() + test_count);
    Rng rng(derive_seed(params.seed, v));
    for (std::size_t i = 0; i < want; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    const std::size_t test_neg = std::min(test_count, want);
    if (want == test_neg) return std::nullopt;

    auto point = [&](Vertex u) {
        const auto r = embedding.row(rows[u]);
        return std::vector<double>(r.begin(), r.end());
    };
    std::vector<std::vector<double>> points;
    std::vector<int> labels;
    for (const Vertex u : train_nbrs) {
        points.push_back(point(u));
        labels.push_back(1);
    }
    for (std::size_t i = test_neg; i < want; ++i) {
        points.push_back(point(pool[i]));
        labels.push_back(-1);
    }
    const RbfSvm svm = train_rbf_svm(points, labels, params.svm);

    std::size_t correct = 0;
    for (const Vertex u : held) correct += svm.predict(embedding.row(rows[u])) == 1;
    for (std::size_t i = 0; i < test_neg; ++i)
        correct += svm.predict(embedding.row(rows[pool[i]])) == -1;
    return static_cast<double>(correct) / static_cast<double>(test_count + test_neg);
}

}  // namespace

double personalized_eval(const HoldoutSplit& split, const EmbeddingTable& embedding, Part part,
                         const LinkEvalParams& params) {
    const auto& tg = split.training_graph;
    const auto rows = row_index(tg, embedding);
    std::vector<std::vector<Vertex>> held(tg.vertex_count());
    for (const auto& e : split.removed_edges) {
        held[tg.vertex_a(e.a)].push_back(tg.vertex_b(e.b));
        held[tg.vertex_b(e.b)].push_back(tg.vertex_a(e.a));
    }
    std::vector<Vertex> nodes;
    for (Vertex v = tg.part_begin(part); v < tg.part_end(part); ++v)
        if (!held[v].empty() && tg.degree(v) > 0) nodes.push_back(v);

    std::vector<std::optional<double>> acc(nodes.size());
    detail::parallel_chunks(nodes.size(), params.threads,
                            [&](std::size_t begin, std::size_t end, unsigned) {
                                for (std::size_t i = begin; i < end; ++i)
                                    acc[i] = personalized_node(tg, embedding, rows, nodes[i],
                                                               held[nodes[i]], params);
                            });
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : acc) {
        if (!a) continue;
        sum += *a;
        ++n;
    }
    if (n == 0)
        throw EmptyTaskError(std::string("no ") + std::string(to_string(part)) +
                             " node has both training and held-out edges");
    return sum / static_cast<double>(n);
}

namespace {

struct PairMlp {
    nn::DenseLayer hidden;
    nn::DenseLayer out;
    std::vector<double> params;

    double score(std::span<const double> x, std::vector<double>& pre, std::vector<double>& h) const {
        pre.assign(hidden.out, 0.0);
        h.assign(hidden.out, 0.0);
        nn::forward(hidden, params, x, pre, h);
        double o_pre = 0.0, o = 0.0;
        nn::forward(out, params, h, {&o_pre, 1}, {&o, 1});
        return o;
    }
};

}  // namespace

double unified_eval(const HoldoutSplit& split, const EmbeddingTable& embedding,
                    const LinkEvalParams& params) {
    if (split.removed_edges.empty()) throw EmptyTaskError("split has no held-out edges");
    const auto& tg = split.training_graph;
    if (tg.edge_count() == 0) throw EmptyTaskError("split has no training edges");
    const auto rows = row_index(tg, embedding);
    const std::size_t r = embedding.dimension();
    const auto original = original_graph(split);

    Rng rng(derive_seed(params.unified.seed, 0));
    const std::size_t capacity = original.nodes_a() * original.nodes_b() - original.edge_count();
    std::size_t excluded = 0;
    for (const auto& e : split.negative_edges) excluded += !original.has_edge(e);
    const std::size_t neg_count =
        std::min(tg.edge_count(), capacity > excluded ? capacity - excluded : 0);
    const auto negatives = sample_negative_pairs(original, neg_count, rng, split.negative_edges);

    struct Example {
        Edge e;
        double target;
    };
    std::vector<Example> train_set;
    for (const auto& e : tg.edges()) train_set.push_back({e, 1.0});
    for (const auto& e : negatives) train_set.push_back({e, 0.0});

    auto features = [&](const Edge& e, std::vector<double>& x) {
        x.resize(2 * r);
        const auto a = embedding.row(rows[tg.vertex_a(e.a)]);
        const auto b = embedding.row(rows[tg.vertex_b(e.b)]);
        std::copy(a.begin(), a.end(), x.begin());
        std::copy(b.begin(), b.end(), x.begin() + static_cast<std::ptrdiff_t>(r));
    };

    const auto& up = params.unified;
    PairMlp mlp;
    const std::size_t hidden = up.hidden == 0 ? r : up.hidden;
    mlp.hidden = nn::add_layer(mlp.params, 2 * r, hidden, nn::Activation::Relu);
    mlp.out = nn::add_layer(mlp.params, hidden, 1, nn::Activation::Sigmoid);
    Rng init(derive_seed(up.seed, 1));
    nn::glorot_init(mlp.hidden, mlp.params, init);
    nn::glorot_init(mlp.out, mlp.params, init);
    nn::Adagrad opt(mlp.params.size(), up.learning_rate, up.adagrad_eps);
    std::vector<double> grad(mlp.params.size());
    std::vector<double> x, pre, h, dh;
    Rng order(derive_seed(up.seed, 2));
    const std::size_t batch = std::max<std::size_t>(1, up.batch_size);
    for (std::size_t epoch = 0; epoch < up.epochs; ++epoch) {
        order.shuffle(train_set.begin(), train_set.end());
        for (std::size_t s = 0; s < train_set.size(); s += batch) {
            const std::size_t t = std::min(train_set.size(), s + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(t - s);
            for (std::size_t i = s; i < t; ++i) {
                features(train_set[i].e, x);
                const double y = mlp.score(x, pre, h);
                const double o_pre = 0.0;  // unused by the sigmoid derivative
                const double dy = scale * 2.0 * (y - train_set[i].target);
                dh.assign(hidden, 0.0);
                nn::backward(mlp.out, mlp.params, h, {&o_pre, 1}, {&y, 1}, {&dy, 1}, dh, grad);
                nn::backward(mlp.hidden, mlp.params, x, pre, h, dh, {}, grad);
            }
            opt.step(mlp.params, grad);
        }
    }

    std::size_t correct = 0;
    for (const auto& e : split.removed_edges) {
        features(e, x);
        correct += mlp.score(x, pre, h) >= 0.5;
    }
    for (const auto& e : split.negative_edges) {
        features(e, x);
        correct += mlp.score(x, pre, h) < 0.5;
    }
    return static_cast<double>(correct) /
           static_cast<double>(split.removed_edges.size() + split.negative_edges.size());
}

std::optional<std::vector<double>> user_centroid(const RatingGraph& ratings,
                                                 const EmbeddingTable& embedding,
                                                 std::uint32_t user) {
    const auto& g = ratings.graph;
    const Vertex u = g.vertex(NodeId{user, Part::A});
    std::vector<double> c(embedding.dimension(), 0.0);
    double total = 0.0;
    for (const Vertex item : g.neighbors(u)) {
        const double w = ratings.weight(Edge{user, g.node(item).index});
        const auto row = embedding.row_of(g, item);
        if (!row) throw LookupError("item '" + g.name(item) + "' missing from embedding");
        const auto x = embedding.row(*row);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += w * x[i];
        total += w;
    }
    if (!(total > 0.0)) return std::nullopt;
    for (double& x : c) x /= total;
    return c;
}

std::vector<std::uint32_t> rank_items(std::span<const double> centroid,
                                      const EmbeddingTable& embedding,
                                      std::span<const std::optional<std::size_t>> item_rows,
                                      const std::unordered_set<std::uint32_t>& exclude,
                                      std::size_t limit) {
    std::vector<std::pair<double, std::uint32_t>> scored;
    for (std::uint32_t j = 0; j < item_rows.size(); ++j) {
        if (!item_rows[j] || exclude.contains(j)) continue;
        scored.emplace_back(dot(centroid, embedding.row(*item_rows[j])), j);
    }
    const auto better = [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    };
    const std::size_t n = std::min(limit, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                      scored.end(), better);
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = scored[i].second;
    return out;
}

std::map<EvalReport::CellKey, double> EvalReport::means() const {
    std::map<CellKey, std::pair<double, std::size_t>> acc;
    for (const auto& e : entries) {
        if (!e.valid) continue;
        auto& [sum, n] = acc[CellKey{e.method, e.task, e.h_or_k, e.metric}];
        sum += e.value;
        ++n;
    }
    std::map<CellKey, double> out;
    for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
    return out;
}

void write_report(std::ostream& out, const EvalReport& report) {
    out << "method,task,h_or_k,seed,metric,value\n";
    for (const auto& e : report.entries) {
        out << e.method << ',' << to_string(e.task) << ',' << detail::format_double(e.h_or_k)
            << ',' << e.seed << ',' << e.metric << ','
            << (e.valid ? detail::format_double(e.value) : std::string("invalid")) << '\n';
    }
}

namespace {

constexpr EvalTask kLinkTasks[] = {EvalTask::APersonalized, EvalTask::BPersonalized,
                                   EvalTask::Unified};

void link_tasks(EvalReport& report, const HoldoutSplit* split, const EmbeddingTable* embedding,
                const std::string& method, double h_or_k, std::uint64_t seed,
                const std::string& failure, const LinkEvalParams& params) {
    for (const EvalTask task : kLinkTasks) {
        EvalEntry entry{method, task, h_or_k, seed, "accuracy", 0.0, true, {}};
        if (!split || !embedding) {
            entry.valid = false;
            entry.message = failure;
        } else {
            try {
                if (task == EvalTask::Unified) entry.value = unified_eval(*split, *embedding, params);
                else
                    entry.value = personalized_eval(
                        *split, *embedding, task == EvalTask::APersonalized ? Part::A : Part::B,
                        params);
            } catch (const Error& err) {
                entry.valid = false;
                entry.message = err.what();
            }
        }
        report.entries.push_back(std::move(entry));
    }
}

LinkEvalParams eval_params_for(const LinkEvalParams& params, std::uint64_t seed) {
    LinkEvalParams p = params;
    p.seed = derive_seed(seed, 20);
    p.unified.seed = derive_seed(seed, 21);
    return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

EvalReport run_link_experiment(const BipartiteGraph& g, std::span<const EmbeddingMethod> methods,
                               std::span<const double> holdouts,
                               std::span<const std::uint64_t> seeds,
                               const PipelineConfig& config, const LinkEvalParams& params) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.seeds.assign(seeds.begin(), seeds.end());
    for (const double h : holdouts) {
        for (const std::uint64_t seed : seeds) {
            std::optional<HoldoutSplit> split;
            std::string failure;
            try {
                split = holdout_split(g, h, seed);
            } catch (const Error& err) {
                failure = err.what();
            }
            EmbedCache cache;
            const auto pc = seeded(config, seed);
            const auto ep = eval_params_for(params, seed);
            for (const auto method : methods) {
                std::optional<EmbeddingTable> emb;
                std::string why = failure;
                if (split) {
                    try {
                        emb = embed(split->training_graph, method, pc, &cache);
                    } catch (const Error& err) {
                        why = err.what();
                    }
                }
                link_tasks(report, split ? &*split : nullptr, emb ? &*emb : nullptr,
                           std::string(to_string(method)), h, seed, why, ep);
            }
        }
    }
    report.runtime_seconds = seconds_since(t0);
    return report;
}

EvalReport run_sweep(const BipartiteGraph& g, EmbeddingMethod method,
                     std::span<const std::size_t> samples_per_node, std::size_t trials,
                     double holdout, std::uint64_t seed, const PipelineConfig& config,
                     const LinkEvalParams& params) {
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    std::vector<HoldoutSplit> splits;
    for (std::size_t t = 0; t < trials; ++t) {
        report.seeds.push_back(t);
        splits.push_back(holdout_split(g, holdout, derive_seed(seed, t)));
    }
    for (const std::size_t sr : samples_per_node) {
        for (std::size_t t = 0; t < trials; ++t) {
            const std::uint64_t trial_seed = derive_seed(seed, 1000 + t);
            PipelineConfig pc = seeded(config, trial_seed);
            pc.sampler.samples_per_node = sr;
            std::optional<EmbeddingTable> emb;
            std::string why;
            try {
                emb = embed(splits[t].training_graph, method, pc);
            } catch (const Error& err) {
                why = err.what();
            }
            link_tasks(report, &splits[t], emb ? &*emb : nullptr, std::string(to_string(method)),
                       static_cast<double>(sr), t, why, eval_params_for(params, trial_seed));
        }
    }
    report.runtime_seconds = seconds_since(t0);
    return report;
}

RecSplit split_ratings(const RatingGraph& ratings, double holdout, std::uint64_t seed) {
    if (!(holdout >= 0.0 && holdout <= 1.0)) throw ParameterError("holdout must lie in [0, 1]");
    const auto& g = ratings.graph;
    std::vector<std::size_t> order(g.edge_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(order.begin(), order.end());
    const auto test_count =
        static_cast<std::size_t>(std::llround(holdout * static_cast<double>(order.size())));
    const std::size_t train_count = order.size() - test_count;

    RecSplit split;
    std::vector<Edge> train;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t k = order[i];
        if (i < train_count) {
            train.push_back(g.edges()[k]);
        } else {
            split.test.push_back(g.edges()[k]);
            split.test_weights.push_back(ratings.weights[k]);
        }
    }
    split.training.graph = with_edges(g, std::move(train));
    for (const auto& e : split.training.graph.edges())
        split.training.weights.push_back(ratings.weight(e));
    return split;
}

RankMetrics recommend_eval(const RecSplit& split, const EmbeddingTable& embedding,
                           const RecParams& params, std::size_t* users_evaluated) {
    const auto& g = split.training.graph;
    std::vector<std::optional<std::size_t>> item_rows(g.nodes_b());
    for (std::uint32_t j = 0; j < g.nodes_b(); ++j) {
        const Vertex v = g.vertex_b(j);
        if (g.degree(v) == 0) continue;
        const auto r = embedding.row_of(g, v);
        if (!r) throw LookupError("item '" + g.name(v) + "' missing from embedding");
        item_rows[j] = *r;
    }
    std::vector<std::unordered_set<std::uint32_t>> relevant(g.nodes_a());
    for (const auto& e : split.test)
        if (item_rows[e.b]) relevant[e.a].insert(e.b);

    std::vector<std::optional<RankMetrics>> per_user(g.nodes_a());
    detail::parallel_chunks(g.nodes_a(), params.threads,
                            [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t u = begin; u < end; ++u) {
            const auto user = static_cast<std::uint32_t>(u);
            if (relevant[u].empty() || g.degree(g.vertex_a(user)) == 0) continue;
            const auto centroid = user_centroid(split.training, embedding, user);
            if (!centroid) continue;
            std::unordered_set<std::uint32_t> exclude;
            for (const Vertex item : g.neighbors(g.vertex_a(user))) exclude.insert(g.node(item).index);
            const auto ranked = rank_items(*centroid, embedding, item_rows, exclude, params.k);
            if (ranked.empty()) continue;
            per_user[u] = metrics_at_k(ranked, relevant[u], params.k, params.gain);
        }
    });
    RankMetrics mean;
    std::size_t n = 0;
    for (const auto& m : per_user) {
        if (!m) continue;
        mean.f1 += m->f1;
        mean.ndcg += m->ndcg;
        mean.map += m->map;
        mean.mrr += m->mrr;
        ++n;
    }
    if (users_evaluated) *users_evaluated = n;
    if (n == 0) throw EmptyTaskError("no user has both training and test ratings");
    const double d = static_cast<double>(n);
    mean.f1 /= d;
    mean.ndcg /= d;
    mean.map /= d;
    mean.mrr /= d;
    return mean;
}

EvalReport run_rec_experiment(const RatingGraph& ratings, std::span<const EmbeddingMethod> methods,
                              std::uint64_t seed, const PipelineConfig& config,
                              const RecParams& params) {
    if (ratings.graph.edge_count() == 0) throw EmptyGraphError("no ratings");
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.seeds = {seed};
    const RecSplit split = split_ratings(ratings, params.holdout, seed);
    EmbedCache cache;
    const auto pc = seeded(config, seed);
    const auto k = static_cast<double>(params.k);
    for (const auto method : methods) {
        const std::string name(to_string(method));
        const auto emb = embed(split.training.graph, method, pc, &cache);
        const RankMetrics m = recommend_eval(split, emb, params);
        const std::pair<const char*, double> values[] = {
            {"f1", m.f1}, {"ndcg", m.ndcg}, {"map", m.map}, {"mrr", m.mrr}};
        for (const auto& [metric, value] : values)
            report.entries.push_back({name, EvalTask::Recommend, k, seed, metric, value, true, {}});
    }
    report.runtime_seconds = seconds_since(t0);
    return report;
}

}  // namespace bipembed
