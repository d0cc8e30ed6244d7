#include <cmath>
#include <sstream>

#include "bipembed/error.hpp"
#include "bipembed/sampler.hpp"
#include "bipembed/trainer.hpp"
#include "doctest.h"
#include "gradient_checks.hpp"
#include "helpers.hpp"

using namespace bipembed;

namespace {

double cosine(std::span<const double> x, std::span<const double> y) {
    return dot(x, y) / std::sqrt(dot(x, x) * dot(y, y));
}

// a0, a1 | b0, b1 with every row set to `value`.
EmbeddingTable filled(const BipartiteGraph& g, std::size_t r, double value) {
    auto t = EmbeddingTable::for_graph(g, r);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

}  // namespace

TEST_CASE("initialization range and determinism") {
    const auto g = testing::complete(1, 1);
    const auto t = init_embeddings(g, 1, 4);
    CHECK(t.size() == 2);
    for (double x : t.values()) CHECK(std::abs(x) <= 0.5);
    const auto big = init_embeddings(testing::complete(20, 20), 50, 4);
    for (double x : big.values()) CHECK(std::abs(x) <= 0.01);
    CHECK(big.values() == init_embeddings(testing::complete(20, 20), 50, 4).values());
    CHECK(big.values() != init_embeddings(testing::complete(20, 20), 50, 5).values());
    CHECK_THROWS_AS(init_embeddings(g, 0, 1), ParameterError);
}

TEST_CASE("estimator examples") {
    const auto g = testing::complete(2, 2);
    SampleSet s(2);
    s.add_same(RecordKind::AA, 0, 1, 1.0);
    const Vertex gl[] = {0, 1}, gr[] = {2, 3};
    s.add_cross(0, 2, gl, gr, 1.0);
    const auto zero = filled(g, 3, 0.0);
    CHECK(fobe_estimate(zero, s, s[0]) == 0.5);
    CHECK(fobe_estimate(zero, s, s[1]) == 0.25);
    CHECK(hobe_estimate(zero, s, s[0]) == 0.0);

    auto t = filled(g, 1, 0.0);
    t.row(0)[0] = std::sqrt(10.0);
    t.row(1)[0] = std::sqrt(10.0);
    CHECK(fobe_estimate(t, s, s[0]) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))));
    CHECK(fobe_estimate(t, s, s[0]) == doctest::Approx(0.99995).epsilon(1e-5));

    auto neg = filled(g, 1, 1.0);
    neg.row(1)[0] = -1.0;
    CHECK(hobe_estimate(neg, s, s[0]) == 0.0);
    auto ortho = filled(g, 2, 0.0);
    ortho.row(0)[0] = 1.0;
    ortho.row(1)[1] = 1.0;
    CHECK(hobe_estimate(ortho, s, s[0]) == 0.0);
    // every cross dot product equals 0.5
    const auto half = filled(g, 2, 0.5);
    CHECK(hobe_estimate(half, s, s[1]) == doctest::Approx(0.25));
}

TEST_CASE("loss examples") {
    const auto g = testing::complete(2, 2);
    const auto zero = filled(g, 2, 0.0);
    SampleSet s(1);
    s.add_same(RecordKind::AA, 0, 1, 1.0);
    CHECK(fobe_loss(zero, s, {}, 1e-6) == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    SampleSet half(1);
    half.add_same(RecordKind::BB, 2, 3, 0.5);
    CHECK(std::abs(fobe_loss(zero, half, {}, 1e-6)) < 1e-15);

    SampleSet m(1);
    m.add_same(RecordKind::AA, 0, 1, 1.0);
    CHECK(hobe_loss(zero, m, {}) == 1.0);
    auto t = filled(g, 1, 0.0);
    t.row(0)[0] = 0.5;
    t.row(1)[0] = 1.0;  // estimate 0.5
    SampleSet two(1);
    two.add_same(RecordKind::AA, 0, 1, 1.0);
    two.add_same(RecordKind::BB, 2, 3, 0.0);
    CHECK(hobe_loss(t, two, {}) == doctest::Approx(0.125));
    CHECK(hobe_loss(filled(g, 1, 1.0), m, {}) == 0.0);
    const std::size_t only[] = {1};
    CHECK(hobe_loss(t, two, only) == 0.0);
    SampleSet empty(1);
    CHECK_THROWS_AS(hobe_loss(t, empty, {}), ParameterError);
}

TEST_CASE("estimates and losses stay in range") {
    Rng rng(3);
    BipartiteGraph g;
    EmbeddingTable table;
    SampleSet samples;
    std::vector<std::size_t> batch;
    for (int i = 0; i < 200; ++i) {
        testing::embedding_instance(rng, false, g, table, samples, batch);
        for (auto& x : table.values()) x *= 2.0;
        for (const auto& r : samples.records()) {
            const double p = fobe_estimate(table, samples, r);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            CHECK(hobe_estimate(table, samples, r) >= 0.0);
            if (r.kind != RecordKind::AB) {
                const SampleRecord swapped{r.kind, r.right, r.left, 0, r.target};
                CHECK(fobe_estimate(table, samples, swapped) == p);
                CHECK(hobe_estimate(table, samples, swapped) == hobe_estimate(table, samples, r));
            }
        }
        CHECK(fobe_loss(table, samples, batch, 1e-6) >= 0.0);
        CHECK(std::isfinite(fobe_loss(table, samples, batch, 1e-6)));
        CHECK(hobe_loss(table, samples, batch) >= 0.0);
    }
}

TEST_CASE("analytic gradients match finite differences") {
    for (auto kind : {LossKind::FobeKl, LossKind::FobeKlPrinted, LossKind::HobeMse}) {
        const auto rep = testing::embedding_gradient_suite(kind, 60, 11 + static_cast<int>(kind));
        CHECK(rep.instances == 60);
        CHECK(rep.failures == 0);
        CHECK(rep.worst <= testing::kGradTol);
    }
}

TEST_CASE("training lowers the loss on K22") {
    const auto g = testing::complete(2, 2);
    SamplerParams sp;
    sp.samples_per_node = 20;
    const auto samples = fobe_sample(g, sp);
    TrainConfig c;
    c.epochs = 200;
    const auto res = train(samples, g, c);
    REQUIRE(res.loss_trace.size() == 201);
    CHECK(res.loss_trace.back() < res.loss_trace.front());
}

TEST_CASE("one positive record is learned") {
    const auto g = BipartiteGraph::from_edges(2, 1, {{0, 0}, {1, 0}});
    SampleSet s(1);
    s.add_same(RecordKind::AA, 0, 1, 1.0);
    TrainConfig c;
    c.dimension = 2;
    c.learning_rate = 0.5;
    c.batch_size = 1;
    c.epochs = 500;
    const auto res = train(s, g, c);
    CHECK(fobe_estimate(res.table, s, s[0]) > 0.9);
    std::size_t first = 0;
    while (first < res.loss_trace.size() && res.loss_trace[first] > -std::log(0.9)) ++first;
    CHECK(first <= 500);
}

TEST_CASE("empty record lists leave the table alone") {
    const auto g = testing::complete(2, 2);
    TrainConfig c;
    c.dimension = 4;
    const auto init = init_embeddings(g, 4, 1);
    const auto res = train(SampleSet(1), g, c, init);
    CHECK(res.table.values() == init.values());
}

TEST_CASE("divergence is reported") {
    const auto g = testing::complete(2, 2);
    SampleSet s(1);
    s.add_same(RecordKind::AA, 0, 1, 1.0);
    TrainConfig c;
    c.dimension = 2;
    c.loss = LossKind::HobeMse;
    auto bad = init_embeddings(g, 2, 1);
    bad.values()[0] = std::nan("");
    CHECK_THROWS_AS(train(s, g, c, bad), DivergenceError);
    c.learning_rate = 1e300;
    c.epochs = 5;
    try {
        train(s, g, c);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 1);
    }
}

TEST_CASE("configuration checks") {
    TrainConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(validate(c), ParameterError);
    c = TrainConfig{};
    c.prob_floor = 0.5;
    CHECK_THROWS_AS(validate(c), ParameterError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ParameterError);
    CHECK_NOTHROW(validate(TrainConfig{}));
}

TEST_CASE("single-thread training is reproducible") {
    const auto g = testing::random_graph(20, 20, 0.15, 2);
    SamplerParams sp;
    sp.samples_per_node = 10;
    const auto samples = fobe_sample(g, sp);
    TrainConfig c;
    c.dimension = 8;
    c.epochs = 3;
    c.seed = 5;
    const auto a = train(samples, g, c);
    const auto b = train(samples, g, c);
    CHECK(a.table.values() == b.table.values());
    CHECK(a.loss_trace == b.loss_trace);
    c.threads = 3;
    const auto p = train(samples, g, c);
    for (double x : p.table.values()) CHECK(std::isfinite(x));
    CHECK(p.loss_trace.back() < p.loss_trace.front());
}

TEST_CASE("trained embeddings separate SBM blocks") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto g = testing::two_block_sbm(40, 0.3, 0.02, seed);
        SamplerParams sp;
        sp.samples_per_node = 50;
        sp.seed = seed;
        const auto sims = edge_similarities(g, jor_relax(g, JorParams{10, 20, 0.5, seed}));
        for (auto kind : {LossKind::FobeKl, LossKind::HobeMse}) {
            const auto samples = kind == LossKind::HobeMse ? hobe_sample(g, sims, sp) : fobe_sample(g, sp);
            TrainConfig c;
            c.dimension = 16;
            c.seed = seed;
            c.loss = kind;
            const auto t = train(samples, g, c).table;
            double within = 0.0, cross = 0.0;
            int nw = 0, nc = 0;
            for (Vertex i = 0; i < g.vertex_count(); ++i)
                for (Vertex j = i + 1; j < g.vertex_count(); ++j) {
                    if (g.part_of(i) != g.part_of(j)) continue;
                    const bool same = g.node(i).index / 20 == g.node(j).index / 20;
                    (same ? within : cross) += cosine(t.row(i), t.row(j));
                    (same ? nw : nc) += 1;
                }
            CHECK(within / nw > cross / nc);
        }
    }
}

TEST_CASE("embedding and trace files") {
    const auto g = testing::complete(2, 3);
    const auto t = init_embeddings(g, 3, 9);
    std::ostringstream out;
    write_embeddings(out, t);
    CHECK(out.str().rfind("5 3\n", 0) == 0);
    std::istringstream in(out.str());
    const auto back = read_embeddings(in);
    CHECK(back.values() == t.values());
    CHECK(back.id(4) == t.id(4));
    CHECK(back.row_of(g, 3).value() == 3);
    std::istringstream bad("2 3\nx 1 2\n");
    CHECK_THROWS_AS(read_embeddings(bad), ParseError);
    std::ostringstream trace;
    const double values[] = {1.0, 0.5};
    write_loss_trace(trace, values);
    CHECK(trace.str() == "epoch,loss\n0,1\n1,0.5\n");
}
