#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bipembed/algdist.hpp"
#include "bipembed/error.hpp"
#include "bipembed/sampler.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bipembed;

namespace {

SamplerParams sparams(std::size_t sr, std::size_t gamma, double nu, std::uint64_t seed = 0) {
    SamplerParams p;
    p.samples_per_node = sr;
    p.gamma_size = gamma;
    p.negative_ratio = nu;
    p.seed = seed;
    return p;
}

EdgeSimilarities random_sims(const BipartiteGraph& g, std::uint64_t seed) {
    // Symmetric per-edge values, stored in both endpoint slots.
    Rng rng(seed);
    std::vector<double> per_edge(g.edge_count());
    for (auto& x : per_edge) x = std::round(rng.uniform01() * 20.0) / 20.0;
    std::vector<double> slots(g.adjacency_size());
    const auto edges = g.edges();
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const auto nb = g.neighbors(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const Vertex a = g.part_of(v) == Part::A ? v : nb[k];
            const Vertex b = g.part_of(v) == Part::A ? nb[k] : v;
            const Edge e{g.node(a).index, g.node(b).index};
            const auto it = std::lower_bound(edges.begin(), edges.end(), e);
            slots[g.adjacency_offset(v) + k] = per_edge[static_cast<std::size_t>(it - edges.begin())];
        }
    }
    return EdgeSimilarities(g, std::move(slots));
}

double sim_oracle(const BipartiteGraph& g, const EdgeSimilarities& s, Vertex x, Vertex y) {
    const Vertex a = g.part_of(x) == Part::A ? x : y;
    const Vertex b = g.part_of(x) == Part::A ? y : x;
    return s.at(g, Edge{g.node(a).index, g.node(b).index});
}

double same_oracle(const BipartiteGraph& g, const EdgeSimilarities& s, Vertex i, Vertex j) {
    double best = 0.0;
    for (Vertex k = 0; k < g.vertex_count(); ++k) {
        if (g.part_of(k) == g.part_of(i)) continue;
        const bool ik = std::count(g.neighbors(i).begin(), g.neighbors(i).end(), k) > 0;
        const bool jk = std::count(g.neighbors(j).begin(), g.neighbors(j).end(), k) > 0;
        if (ik && jk) best = std::max(best, std::min(sim_oracle(g, s, i, k), sim_oracle(g, s, j, k)));
    }
    return best;
}

double cross_oracle(const BipartiteGraph& g, const EdgeSimilarities& s, Vertex i, Vertex j) {
    double best = 0.0;
    for (Vertex ak : g.neighbors(j)) best = std::max(best, same_oracle(g, s, i, ak));
    for (Vertex bk : g.neighbors(i)) best = std::max(best, same_oracle(g, s, j, bk));
    return best;
}

bool adjacent(const BipartiteGraph& g, Vertex x, Vertex y) {
    const auto nb = g.neighbors(x);
    return std::binary_search(nb.begin(), nb.end(), y);
}

void check_records(const BipartiteGraph& g, const SampleSet& s, bool binary) {
    for (const auto& r : s.records()) {
        CHECK(r.target >= 0.0);
        CHECK(r.target <= 1.0);
        if (binary) CHECK((r.target == 0.0 || r.target == 1.0));
        if (r.kind == RecordKind::AB) {
            CHECK(g.part_of(r.left) == Part::A);
            CHECK(g.part_of(r.right) == Part::B);
            REQUIRE(s.gamma_left(r).size() == s.gamma_size());
            REQUIRE(s.gamma_right(r).size() == s.gamma_size());
            for (Vertex x : s.gamma_left(r)) CHECK(adjacent(g, r.right, x));
            for (Vertex x : s.gamma_right(r)) CHECK(adjacent(g, r.left, x));
        } else {
            const Part p = r.kind == RecordKind::AA ? Part::A : Part::B;
            CHECK(g.part_of(r.left) == p);
            CHECK(g.part_of(r.right) == p);
            CHECK(s.gamma_left(r).empty());
        }
    }
}

}  // namespace

TEST_CASE("first-order same-part observations") {
    const auto path = BipartiteGraph::from_edges(2, 1, {{0, 0}, {1, 0}});
    CHECK(fobe_observe_same(path, NodeId{0, Part::A}, NodeId{1, Part::A}) == 1);
    const auto stars = BipartiteGraph::from_edges(2, 2, {{0, 0}, {1, 1}});
    CHECK(fobe_observe_same(stars, 0, 1) == 0);
    CHECK(fobe_observe_same(stars, 0, 0) == 1);
    CHECK_THROWS_AS(fobe_observe_same(stars, 0, 2), TypeError);
}

TEST_CASE("first-order sampling on a single edge") {
    const auto g = BipartiteGraph::from_edges(1, 1, {{0, 0}});
    const auto s = fobe_sample(g, sparams(1, 1, 0.0));
    std::set<std::tuple<RecordKind, Vertex, Vertex, double>> seen;
    for (const auto& r : s.records()) {
        seen.emplace(r.kind, r.left, r.right, r.target);
        if (r.kind == RecordKind::AB) {
            CHECK(s.gamma_left(r)[0] == 0);
            CHECK(s.gamma_right(r)[0] == 1);
        }
    }
    const std::set<std::tuple<RecordKind, Vertex, Vertex, double>> want{
        {RecordKind::AA, 0, 0, 1.0}, {RecordKind::BB, 1, 1, 1.0}, {RecordKind::AB, 0, 1, 1.0}};
    CHECK(seen == want);
}

TEST_CASE("first-order sampling invariants") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto g = testing::random_graph(12, 9, 0.25, seed);
        for (double nu : {0.0, 1.0, 1.5}) {
            const auto s = fobe_sample(g, sparams(7, 3, nu, seed));
            check_records(g, s, true);
            std::size_t live = 0;
            for (Vertex v = 0; v < g.vertex_count(); ++v) live += g.degree(v) > 0;
            const std::size_t neg = static_cast<std::size_t>(std::ceil(nu));
            CHECK(s.size() + s.skipped_negatives == live * 7 * 2 * (1 + neg));
            CHECK(s.skipped_nodes == g.vertex_count() - live);
            std::size_t zeros = 0;
            for (const auto& r : s.records()) {
                if (r.target == 1.0) {
                    if (r.kind == RecordKind::AB) CHECK(adjacent(g, r.left, r.right));
                    else CHECK(neighborhoods_intersect(g, r.left, r.right));
                } else {
                    ++zeros;
                    if (r.kind == RecordKind::AB) CHECK_FALSE(adjacent(g, r.left, r.right));
                    else CHECK_FALSE(neighborhoods_intersect(g, r.left, r.right));
                }
            }
            if (nu == 0.0) CHECK(zeros == 0);
        }
    }
}

TEST_CASE("complete bipartite cross records are all positive") {
    const auto g = testing::complete(2, 2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = fobe_sample(g, sparams(10, 4, 1.0, seed));
        for (const auto& r : s.records())
            if (r.kind == RecordKind::AB) CHECK(r.target == 1.0);
        check_records(g, s, true);
        CHECK(s.skipped_negatives > 0);
    }
}

TEST_CASE("higher-order same-part observation examples") {
    // a0, a1 share b0 and b1.
    const auto g = testing::complete(2, 2);
    std::vector<double> slots(g.adjacency_size());
    auto set = [&](Vertex v, Vertex u, double x) {
        const auto nb = g.neighbors(v);
        slots[g.adjacency_offset(v) + static_cast<std::size_t>(std::find(nb.begin(), nb.end(), u) - nb.begin())] = x;
    };
    const std::tuple<Vertex, Vertex, double> edges[] = {{0, 2, 0.9}, {1, 2, 0.7}, {0, 3, 0.6}, {1, 3, 0.8}};
    for (auto [a, b, x] : edges) {
        set(a, b, x);
        set(b, a, x);
    }
    const EdgeSimilarities sims(g, slots);
    CHECK(hobe_observe_same(g, sims, 0, 1) == 0.7);
    CHECK_THROWS_AS(hobe_observe_same(g, sims, 0, 2), TypeError);

    const auto stars = BipartiteGraph::from_edges(2, 2, {{0, 0}, {1, 1}});
    const EdgeSimilarities ones(stars, std::vector<double>(stars.adjacency_size(), 1.0));
    CHECK(hobe_observe_same(stars, ones, 0, 1) == 0.0);
    CHECK(hobe_observe_same(stars, ones, 0, 0) == 1.0);
    CHECK(hobe_observe_cross(stars, ones, 0, 3) == 0.0);
    CHECK_THROWS_AS(hobe_observe_cross(stars, ones, 0, 1), TypeError);
}

TEST_CASE("higher-order cross observation examples") {
    const auto k2 = BipartiteGraph::from_edges(1, 1, {{0, 0}});
    const EdgeSimilarities s(k2, {0.37, 0.37});
    CHECK(hobe_observe_cross(k2, s, 0, 1) == 0.37);
    CHECK(hobe_observe_cross(k2, s, 1, 0) == 0.37);
    const auto g = testing::random_graph(6, 6, 0.5, 3);
    const EdgeSimilarities flat(g, std::vector<double>(g.adjacency_size(), 0.42));
    for (Vertex a = 0; a < 6; ++a)
        for (Vertex b = 6; b < 12; ++b) {
            const double want = cross_oracle(g, flat, a, b) > 0.0 ? 0.42 : 0.0;
            CHECK(hobe_observe_cross(g, flat, a, b) == want);
        }
}

TEST_CASE("higher-order observations match brute force") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto g = testing::random_graph(6, 6, 0.35, seed);
        if (g.edge_count() == 0) continue;
        const auto sims = random_sims(g, seed);
        CrossObserver observe(g, sims);
        for (Vertex i = 0; i < 12; ++i)
            for (Vertex j = 0; j < 12; ++j) {
                if (g.part_of(i) == g.part_of(j)) {
                    CHECK(hobe_observe_same(g, sims, i, j) == same_oracle(g, sims, i, j));
                } else {
                    const double want = cross_oracle(g, sims, i, j);
                    CHECK(hobe_observe_cross(g, sims, i, j) == want);
                    CHECK(observe(i, j) == want);
                }
            }
    }
}

TEST_CASE("higher-order sampling") {
    SUBCASE("unit similarity on one edge gives unit targets") {
        const auto g = BipartiteGraph::from_edges(1, 1, {{0, 0}});
        const EdgeSimilarities ones(g, {1.0, 1.0});
        const auto s = hobe_sample(g, ones, sparams(5, 2, 0.0));
        CHECK(s.size() == 20);
        for (const auto& r : s.records()) CHECK(r.target == 1.0);
    }
    SUBCASE("zero similarity gives zero targets") {
        const auto g = testing::random_graph(5, 5, 0.5, 1);
        const EdgeSimilarities zeros(g, std::vector<double>(g.adjacency_size(), 0.0));
        const auto s = hobe_sample(g, zeros, sparams(5, 2, 1.0));
        for (const auto& r : s.records()) CHECK(r.target == 0.0);
    }
    SUBCASE("cycle pairs reach three hops") {
        const auto g = BipartiteGraph::from_edges(2, 2, {{0, 0}, {0, 1}, {1, 0}});
        const EdgeSimilarities half(g, std::vector<double>(g.adjacency_size(), 0.5));
        const auto s = hobe_sample(g, half, sparams(200, 2, 0.0, 4));
        bool far = false;
        for (const auto& r : s.records())
            if (r.kind == RecordKind::AB && !adjacent(g, r.left, r.right)) {
                far = true;
                CHECK(r.target == 0.5);
            }
        CHECK(far);
    }
    SUBCASE("records satisfy their invariants and targets") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto g = testing::random_graph(8, 7, 0.3, seed);
            const auto coords = jor_relax(g, JorParams{10, 20, 0.5, seed});
            const auto sims = edge_similarities(g, coords);
            const auto s = hobe_sample(g, sims, sparams(6, 3, 1.0, seed));
            check_records(g, s, false);
            for (const auto& r : s.records()) {
                if (r.target == 0.0) continue;
                if (r.kind == RecordKind::AB) CHECK(r.target == cross_oracle(g, sims, r.left, r.right));
                else CHECK(r.target == same_oracle(g, sims, r.left, r.right));
            }
        }
    }
    const auto g = testing::complete(2, 2);
    const EdgeSimilarities wrong(testing::complete(1, 1), {1.0, 1.0});
    CHECK_THROWS_AS(hobe_sample(g, wrong, sparams(1, 1, 0.0)), ShapeError);
}

TEST_CASE("sampling is deterministic and thread independent") {
    const auto g = testing::random_graph(40, 30, 0.1, 6);
    const auto sims = edge_similarities(g, jor_relax(g, JorParams{10, 20, 0.5, 6}));
    auto text = [&](const SampleSet& s) {
        std::ostringstream out;
        write_samples(out, g, s);
        return out.str();
    };
    auto p = sparams(20, 5, 1.0, 77);
    const auto f1 = text(fobe_sample(g, p));
    const auto h1 = text(hobe_sample(g, sims, p));
    CHECK(f1 == text(fobe_sample(g, p)));
    CHECK(h1 == text(hobe_sample(g, sims, p)));
    p.threads = 3;
    CHECK(f1 == text(fobe_sample(g, p)));
    CHECK(h1 == text(hobe_sample(g, sims, p)));
    p.threads = 1;
    p.seed = 78;
    CHECK(f1 != text(fobe_sample(g, p)));
}

TEST_CASE("parameter and record errors") {
    const auto g = testing::complete(2, 2);
    CHECK_THROWS_AS(fobe_sample(g, sparams(0, 1, 1.0)), ParameterError);
    CHECK_THROWS_AS(fobe_sample(g, sparams(1, 0, 1.0)), ParameterError);
    CHECK_THROWS_AS(fobe_sample(g, sparams(1, 1, -1.0)), ParameterError);
    SampleSet s(2);
    const Vertex one[] = {0};
    CHECK_THROWS_AS(s.add_cross(0, 2, one, one, 1.0), MalformedRecordError);
}

TEST_CASE("sample file round trip") {
    const auto g = testing::random_graph(6, 6, 0.4, 2);
    const auto s = fobe_sample(g, sparams(3, 2, 1.0, 5));
    std::ostringstream out;
    write_samples(out, g, s);
    std::istringstream in(out.str());
    const auto back = read_samples(in, g);
    REQUIRE(back.size() == s.size());
    std::ostringstream again;
    write_samples(again, g, back);
    CHECK(again.str() == out.str());
    std::istringstream bad("XX\ta0\tb0\t1\t\t\n");
    CHECK_THROWS_AS(read_samples(bad, g), ParseError);
}
