#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bipembed/error.hpp"
#include "bipembed/eval.hpp"
#include "bipembed/metrics.hpp"
#include "bipembed/svm.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "metric_oracle.hpp"

using namespace bipembed;

namespace {

std::vector<std::vector<double>> pts(std::initializer_list<std::vector<double>> xs) { return xs; }

/// Two disjoint complete blocks; block-indicator embedding in 4 dimensions.
struct Blocks {
    BipartiteGraph g;
    EmbeddingTable emb;
};

Blocks two_blocks(std::uint32_t n) {
    std::vector<Edge> edges;
    const std::uint32_t half = n / 2;
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = 0; b < n; ++b)
            if (a / half == b / half) edges.push_back({a, b});
    Blocks out{BipartiteGraph::from_edges(n, n, edges), {}};
    out.emb = EmbeddingTable::for_graph(out.g, 4);
    for (Vertex v = 0; v < out.g.vertex_count(); ++v) {
        const double s = out.g.node(v).index / half == 0 ? 1.0 : -1.0;
        for (auto& x : out.emb.row(v)) x = s;
    }
    return out;
}

EmbeddingTable gaussian_table(const BipartiteGraph& g, std::size_t r, std::uint64_t seed) {
    auto t = EmbeddingTable::for_graph(g, r);
    Rng rng(seed);
    for (auto& x : t.values()) x = rng.uniform(-1.0, 1.0);
    return t;
}

PipelineConfig small_pipeline() {
    PipelineConfig c;
    c.sampler.samples_per_node = 5;
    c.train.dimension = 8;
    c.train.epochs = 2;
    c.combiner.combined_dim = 4;
    c.combiner.epochs = 2;
    return c;
}

}  // namespace

TEST_CASE("svm examples") {
    const auto two = pts({{0.0}, {10.0}});
    const int two_labels[] = {1, -1};
    const auto s = train_rbf_svm(two, two_labels, {});
    CHECK(s.predict(two[0]) == 1);
    CHECK(s.predict(two[1]) == -1);
    CHECK(s.solution().converged);

    const auto xor_pts = pts({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
    const int xor_labels[] = {1, 1, -1, -1};
    const auto x = train_rbf_svm(xor_pts, xor_labels, {});
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.predict(xor_pts[i]) == xor_labels[i]);
    CHECK(kkt_violation(x, xor_pts, xor_labels) <= 1e-3);

    const auto dup = pts({{1.0, 2.0}, {1.0, 2.0}, {5.0, 5.0}});
    const int dup_labels[] = {1, -1, -1};
    const auto d = train_rbf_svm(dup, dup_labels, {});
    CHECK((d.predict(dup[0]) == 1) + (d.predict(dup[1]) == -1) <= 1);

    const int same[] = {1, 1};
    CHECK_THROWS_AS(train_rbf_svm(two, same, {}), DegenerateClassifierError);
    const int bad[] = {1, 0};
    CHECK_THROWS_AS(train_rbf_svm(two, bad, {}), ParameterError);
    const auto ragged = pts({{0.0}, {1.0, 2.0}});
    CHECK_THROWS_AS(train_rbf_svm(ragged, two_labels, {}), ShapeError);
    CHECK_THROWS_AS(s.decision(std::vector<double>{1.0, 2.0}), ShapeError);
    CHECK(rbf_kernel(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 2.0}, 0.1) ==
          doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("svm solutions satisfy the optimality conditions") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + rng.below(60);
        std::vector<std::vector<double>> p(n, std::vector<double>(3));
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : p[i]) v = rng.uniform(-2.0, 2.0);
            y[i] = p[i][0] + 0.5 * rng.uniform(-1.0, 1.0) > 0 ? 1 : -1;
        }
        y[0] = 1;
        y[1] = -1;
        SvmParams params;
        params.c = trial % 2 == 0 ? 1.0 : 10.0;
        const auto svm = train_rbf_svm(p, y, params);
        CHECK(svm.solution().converged);
        CHECK(kkt_violation(svm, p, y) <= 1e-3 + 1e-9);
        double balance = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = svm.solution().alpha[i];
            CHECK(a >= 0.0);
            CHECK(a <= params.c + 1e-12);
            balance += a * y[i];
        }
        CHECK(std::abs(balance) < 1e-9);
    }
}

TEST_CASE("metric examples") {
    const std::uint32_t list[] = {4, 1, 2, 3, 5, 6, 7, 8, 9, 10};
    const auto m = metrics_at_k(list, std::unordered_set<std::uint32_t>{4}, 10).value();
    CHECK(m.mrr == 1.0);
    CHECK(m.map == 1.0);
    CHECK(m.ndcg == 1.0);
    CHECK(m.f1 == doctest::Approx(2.0 / 11.0));
    const auto third = metrics_at_k(list, std::unordered_set<std::uint32_t>{2}, 10).value();
    CHECK(third.mrr == doctest::Approx(1.0 / 3.0));
    const std::uint32_t pair[] = {0, 1};
    const auto b = metrics_at_k(pair, std::unordered_set<std::uint32_t>{1}, 2).value();
    CHECK(b.ndcg == doctest::Approx(1.0 / std::log2(3.0)));
    CHECK_FALSE(metrics_at_k(pair, std::unordered_set<std::uint32_t>{}, 2).has_value());
    CHECK_THROWS_AS(metrics_at_k(pair, std::unordered_set<std::uint32_t>{1}, 0), ParameterError);
    // graded gains
    const std::unordered_map<std::uint32_t, double> grades{{0, 1.0}, {1, 3.0}};
    const auto lin = metrics_at_k(pair, grades, 2).value();
    CHECK(lin.ndcg == doctest::Approx((1.0 + 3.0 / std::log2(3.0)) / (3.0 + 1.0 / std::log2(3.0))));
    const auto ex = metrics_at_k(pair, grades, 2, GainMode::Exponential).value();
    CHECK(ex.ndcg == doctest::Approx((1.0 + 7.0 / std::log2(3.0)) / (7.0 + 1.0 / std::log2(3.0))));
}

TEST_CASE("metrics agree with an exhaustive oracle") {
    const auto sweep = testing::metric_oracle_sweep(5, 1e-12);
    CHECK(sweep.cases > 10000);
    CHECK(sweep.mismatches == 0);
}

TEST_CASE("metrics lie in the unit interval and ideal rankings score one") {
    Rng rng(2);
    for (int i = 0; i < 300; ++i) {
        const std::uint32_t n = 1 + std::uint32_t(rng.below(12));
        std::vector<std::uint32_t> list(n);
        for (std::uint32_t j = 0; j < n; ++j) list[j] = j;
        rng.shuffle(list.begin(), list.end());
        std::unordered_set<std::uint32_t> rel;
        for (std::uint32_t j = 0; j < n; ++j)
            if (rng.bernoulli(0.3)) rel.insert(j);
        const std::size_t k = 1 + rng.below(n + 2);
        const auto m = metrics_at_k(list, rel, k);
        if (rel.empty()) {
            CHECK_FALSE(m.has_value());
            continue;
        }
        for (double v : {m->f1, m->ndcg, m->map, m->mrr}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-15);
        }
        const std::size_t head = std::min(k, rel.size());
        std::size_t top = 0;
        for (std::size_t j = 0; j < head; ++j) top += rel.count(list[j]);
        const bool ideal = top == head;
        CHECK((std::abs(m->ndcg - 1.0) < 1e-12) == ideal);
    }
}

TEST_CASE("centroids and ranking") {
    const auto g = BipartiteGraph::from_edges(2, 3, {{0, 0}, {0, 1}, {1, 2}});
    RatingGraph r{g, {1.0, 3.0, 2.0}};
    auto emb = EmbeddingTable::for_graph(g, 1);
    emb.row(2)[0] = 0.0;
    emb.row(3)[0] = 4.0;
    emb.row(4)[0] = -2.0;
    CHECK(user_centroid(r, emb, 0).value() == std::vector<double>{3.0});
    CHECK(user_centroid(r, emb, 1).value() == std::vector<double>{-2.0});
    RatingGraph even{g, {1.0, 1.0, 1.0}};
    CHECK(user_centroid(even, emb, 0).value() == std::vector<double>{2.0});
    RatingGraph zero{g, {0.0, 0.0, 1.0}};
    CHECK_FALSE(user_centroid(zero, emb, 0).has_value());

    const auto h = BipartiteGraph::from_edges(1, 3, {{0, 0}, {0, 1}, {0, 2}});
    auto items = EmbeddingTable::for_graph(h, 2);
    const double coords[3][2] = {{2, 0}, {1, 0}, {0, 1}};
    for (int j = 0; j < 3; ++j)
        for (int d = 0; d < 2; ++d) items.row(1 + j)[d] = coords[j][d];
    const std::vector<std::optional<std::size_t>> rows{1, 2, 3};
    const std::vector<double> c{1.0, 0.0};
    CHECK(rank_items(c, items, rows, {}) == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(rank_items(c, items, rows, {0}) == std::vector<std::uint32_t>{1, 2});
    CHECK(rank_items(c, items, rows, {}, 1) == std::vector<std::uint32_t>{0});
    const std::vector<double> flat{0.0, 0.0};
    CHECK(rank_items(flat, items, rows, {}) == std::vector<std::uint32_t>{0, 1, 2});
    const std::vector<std::optional<std::size_t>> partial{std::nullopt, 2, 3};
    CHECK(rank_items(c, items, partial, {}) == std::vector<std::uint32_t>{1, 2});
}

TEST_CASE("personalized and unified tasks on separable embeddings") {
    const auto b = two_blocks(20);
    const auto split = holdout_split(b.g, 0.5, 3);
    REQUIRE_FALSE(split.removed_edges.empty());
    CHECK(personalized_eval(split, b.emb, Part::A) == 1.0);
    CHECK(personalized_eval(split, b.emb, Part::B) == 1.0);
    LinkEvalParams p;
    p.unified.hidden = 16;
    p.unified.epochs = 200;
    p.unified.learning_rate = 0.1;
    CHECK(unified_eval(split, b.emb, p) == 1.0);
}

TEST_CASE("nodes without held-out edges are skipped") {
    auto b = two_blocks(10);
    HoldoutSplit split;
    // a0 loses b1; everything else stays.
    std::vector<Edge> keep;
    for (const auto& e : b.g.edges())
        if (!(e.a == 0 && e.b == 1)) keep.push_back(e);
    split.training_graph = with_edges(b.g, keep);
    split.removed_edges = {{0, 1}};
    split.negative_edges = {{0, 7}};
    // other A nodes would fail if scored: scramble their block vectors
    for (Vertex v = 1; v < 10; ++v)
        for (auto& x : b.emb.row(v)) x = 0.0;
    CHECK(personalized_eval(split, b.emb, Part::A) == 1.0);
    split.removed_edges.clear();
    CHECK_THROWS_AS(personalized_eval(split, b.emb, Part::A), EmptyTaskError);
    CHECK_THROWS_AS(unified_eval(split, b.emb), EmptyTaskError);
}

TEST_CASE("random embeddings score near chance") {
    double pa = 0.0, pb = 0.0, uni = 0.0;
    const int runs = 3;
    for (int s = 0; s < runs; ++s) {
        const auto g = testing::random_graph(30, 30, 0.3, 40 + s);
        const auto split = holdout_split(g, 0.5, s);
        const auto emb = gaussian_table(g, 8, 90 + s);
        LinkEvalParams p;
        p.seed = s;
        pa += personalized_eval(split, emb, Part::A, p);
        pb += personalized_eval(split, emb, Part::B, p);
        uni += unified_eval(split, emb, p);
    }
    for (double acc : {pa / runs, pb / runs, uni / runs}) {
        CHECK(acc >= 0.4);
        CHECK(acc <= 0.6);
    }
}

TEST_CASE("link experiment reports") {
    const auto g = testing::random_graph(12, 12, 0.4, 3);
    const EmbeddingMethod fobe[] = {EmbeddingMethod::Fobe};
    const double h[] = {0.5};
    const std::uint64_t one[] = {1};
    const auto r1 = run_link_experiment(g, fobe, h, one, small_pipeline());
    REQUIRE(r1.entries.size() == 3);
    for (const auto& e : r1.entries) {
        CHECK(e.valid);
        CHECK(e.value >= 0.0);
        CHECK(e.value <= 1.0);
        CHECK(e.method == "fobe");
        CHECK(e.metric == "accuracy");
    }
    const std::uint64_t two[] = {1, 2};
    const auto r2 = run_link_experiment(g, fobe, h, two, small_pipeline());
    REQUIRE(r2.entries.size() == 6);
    const auto means = r2.means();
    CHECK(means.size() == 3);
    for (const auto& [key, mean] : means) {
        double sum = 0.0;
        for (const auto& e : r2.entries)
            if (e.task == key.task) sum += e.value;
        CHECK(mean == doctest::Approx(sum / 2.0));
    }
    const auto again = run_link_experiment(g, fobe, h, one, small_pipeline());
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.entries[i].value == r1.entries[i].value);

    const auto tree = run_link_experiment(testing::path(6), fobe, h, one, small_pipeline());
    REQUIRE(tree.entries.size() == 3);
    for (const auto& e : tree.entries) {
        CHECK_FALSE(e.valid);
        CHECK_FALSE(e.message.empty());
    }
    CHECK(tree.means().empty());
    std::ostringstream csv;
    write_report(csv, tree);
    CHECK(csv.str().find("fobe,a_personalized,0.5,1,accuracy,invalid\n") != std::string::npos);
}

TEST_CASE("report csv") {
    EvalReport r;
    r.entries.push_back({"hobe", EvalTask::Recommend, 10, 3, "ndcg", 0.25, true, {}});
    r.entries.push_back({"fobe", EvalTask::Unified, 0.1, 0, "accuracy", 0.75, true, {}});
    std::ostringstream out;
    write_report(out, r);
    CHECK(out.str() ==
          "method,task,h_or_k,seed,metric,value\n"
          "hobe,recommend,10,3,ndcg,0.25\n"
          "fobe,unified,0.1,0,accuracy,0.75\n");
}

TEST_CASE("rating splits") {
    const auto g = testing::random_graph(10, 10, 0.5, 1);
    RatingGraph r{g, std::vector<double>(g.edge_count(), 1.0)};
    const auto s = split_ratings(r, 0.4, 7);
    CHECK(s.test.size() == static_cast<std::size_t>(std::llround(0.4 * double(g.edge_count()))));
    CHECK(s.training.graph.edge_count() + s.test.size() == g.edge_count());
    CHECK(s.training.graph.vertex_count() == g.vertex_count());
    for (const auto& e : s.test) CHECK_FALSE(s.training.graph.has_edge(e));
    const auto none = split_ratings(r, 0.0, 7);
    CHECK(none.test.empty());
    CHECK_THROWS_AS(recommend_eval(none, gaussian_table(g, 3, 1), {}), EmptyTaskError);
    CHECK_THROWS_AS(split_ratings(r, 1.2, 7), ParameterError);
}

TEST_CASE("recommendation matches a brute-force recomputation") {
    // 5 users, 5 items, planted preferences on a 2-d embedding
    std::vector<Edge> edges;
    std::vector<double> weights;
    Rng rng(5);
    for (std::uint32_t u = 0; u < 5; ++u)
        for (std::uint32_t i = 0; i < 5; ++i)
            if ((u + i) % 2 == 0 || rng.bernoulli(0.3)) {
                edges.push_back({u, i});
            }
    const auto g = BipartiteGraph::from_edges(5, 5, edges);
    for (std::size_t k = 0; k < g.edge_count(); ++k) weights.push_back(1.0 + double(k % 3));
    const RatingGraph ratings{g, weights};
    auto emb = EmbeddingTable::for_graph(g, 2);
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const double idx = g.node(v).index;
        emb.row(v)[0] = std::cos(idx);
        emb.row(v)[1] = std::sin(idx) + (g.part_of(v) == Part::B ? 0.1 * idx : 0.0);
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto split = split_ratings(ratings, 0.4, seed);
        const auto& tg = split.training.graph;
        for (std::size_t k : {1, 3, 10}) {
            // oracle
            double sums[4] = {0, 0, 0, 0};
            int users = 0;
            for (std::uint32_t u = 0; u < 5; ++u) {
                std::vector<bool> rated(5, false), rankable(5, false), rel(5, false);
                double c[2] = {0, 0}, w = 0;
                for (const auto& e : tg.edges()) {
                    rankable[e.b] = true;
                    if (e.a != u) continue;
                    rated[e.b] = true;
                    const double wt = split.training.weight(e);
                    for (int d = 0; d < 2; ++d) c[d] += wt * emb.row(tg.vertex_b(e.b))[d];
                    w += wt;
                }
                bool any = false;
                for (const auto& e : split.test)
                    if (e.a == u && rankable[e.b]) rel[e.b] = any = true;
                if (!any || w == 0) continue;
                std::vector<std::pair<double, std::uint32_t>> cand;
                for (std::uint32_t i = 0; i < 5; ++i)
                    if (rankable[i] && !rated[i]) {
                        const auto row = emb.row(tg.vertex_b(i));
                        cand.push_back({-(c[0] / w * row[0] + c[1] / w * row[1]), i});
                    }
                if (cand.empty()) continue;
                std::sort(cand.begin(), cand.end());
                std::vector<std::uint32_t> ranked;
                for (std::size_t j = 0; j < std::min(k, cand.size()); ++j) ranked.push_back(cand[j].second);
                const auto m = testing::oracle_metrics(ranked, rel, k);
                sums[0] += m.f1;
                sums[1] += m.ndcg;
                sums[2] += m.map;
                sums[3] += m.mrr;
                ++users;
            }
            RecParams p;
            p.k = k;
            std::size_t evaluated = 0;
            if (users == 0) {
                CHECK_THROWS_AS(recommend_eval(split, emb, p), EmptyTaskError);
                continue;
            }
            const auto got = recommend_eval(split, emb, p, &evaluated);
            CHECK(evaluated == static_cast<std::size_t>(users));
            CHECK(got.f1 == doctest::Approx(sums[0] / users).epsilon(1e-12));
            CHECK(got.ndcg == doctest::Approx(sums[1] / users).epsilon(1e-12));
            CHECK(got.map == doctest::Approx(sums[2] / users).epsilon(1e-12));
            CHECK(got.mrr == doctest::Approx(sums[3] / users).epsilon(1e-12));
        }
    }
}

TEST_CASE("planted first-ranked test items give reciprocal rank one") {
    // user u < 5 rates item u in training and item u + 5 in test; user 5
    // rates items 5..9 in training so that they are rankable.
    std::vector<Edge> train;
    for (std::uint32_t u = 0; u < 5; ++u) {
        train.push_back({u, u});
        train.push_back({5, u + 5});
    }
    const auto g = BipartiteGraph::from_edges(6, 10, train);
    RecSplit split;
    split.training.graph = g;
    split.training.weights.assign(g.edge_count(), 1.0);
    for (std::uint32_t u = 0; u < 5; ++u) split.test.push_back({u, u + 5});
    split.test_weights.assign(5, 1.0);
    auto emb = EmbeddingTable::for_graph(g, 5);
    for (std::uint32_t j = 0; j < 10; ++j) emb.row(g.vertex_b(j))[j % 5] = 1.0;
    std::size_t users = 0;
    const auto m = recommend_eval(split, emb, {}, &users);
    CHECK(users == 5);
    CHECK(m.mrr == 1.0);
}

TEST_CASE("recommendation experiment") {
    const auto g = testing::random_graph(15, 15, 0.4, 2);
    RatingGraph r{g, std::vector<double>(g.edge_count(), 2.0)};
    const EmbeddingMethod methods[] = {EmbeddingMethod::Fobe, EmbeddingMethod::Hobe};
    const auto rep = run_rec_experiment(r, methods, 4, small_pipeline());
    REQUIRE(rep.entries.size() == 8);
    CHECK(rep.entries[0].metric == "f1");
    CHECK(rep.entries[7].metric == "mrr");
    CHECK(rep.entries[7].method == "hobe");
    CHECK(rep.entries[0].h_or_k == 10.0);
    for (const auto& e : rep.entries) {
        CHECK(e.value >= 0.0);
        CHECK(e.value <= 1.0);
    }
    RecParams p;
    p.holdout = 0.0;
    CHECK_THROWS_AS(run_rec_experiment(r, methods, 4, small_pipeline(), p), EmptyTaskError);
}
