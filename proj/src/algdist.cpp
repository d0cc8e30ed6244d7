#include "bipembed/algdist.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "bipembed/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace bipembed {

AlgebraicCoordinates::AlgebraicCoordinates(std::size_t nodes_a, std::size_t nodes_b,
                                           JorParams params, std::vector<double> values)
    : nodes_a_(nodes_a), nodes_b_(nodes_b), params_(params), values_(std::move(values)) {
    if (values_.size() != params_.trials * vertex_count()) {
        throw ShapeError("coordinate matrix does not match trials x vertices");
    }
}

Vertex AlgebraicCoordinates::vertex(NodeId n) const {
    const std::size_t limit = n.part == Part::A ? nodes_a_ : nodes_b_;
    if (n.index >= limit) {
        throw LookupError("node is not in the coordinate table");
    }
    return n.part == Part::A ? n.index : static_cast<Vertex>(nodes_a_ + n.index);
}

namespace {

void check_params(const BipartiteGraph& g, const JorParams& p) {
    if (g.empty()) throw EmptyGraphError("cannot relax an empty graph");
    if (p.trials < 1) throw ParameterError("trials R must be >= 1");
    if (p.iterations < 1) throw ParameterError("iterations K must be >= 1");
    if (!(p.damping > 0.0 && p.damping < 1.0)) {
        throw ParameterError("damping lambda must lie in (0, 1)");
    }
}

std::vector<double> inverse_degrees(const BipartiteGraph& g) {
    std::vector<double> inv(g.vertex_count(), 0.0);
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        if (g.degree(v) > 0) inv[v] = 1.0 / static_cast<double>(g.degree(v));
    }
    return inv;
}

void sweep(const BipartiteGraph& g, std::span<const double> inv_degree,
           std::span<const double> cur, std::span<double> next, double damping) {
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const auto nb = g.neighbors(v);
        if (nb.empty()) {
            next[v] = cur[v];
            continue;
        }
        // Offsets from the first neighbor keep constant neighborhoods exact.
        const double base = cur[nb.front()];
        double lo = base;
        double hi = base;
        double num = 0.0;
        double den = 0.0;
        for (const Vertex u : nb) {
            num += (cur[u] - base) * inv_degree[u];
            den += inv_degree[u];
            lo = std::min(lo, cur[u]);
            hi = std::max(hi, cur[u]);
        }
        const double mean = std::clamp(base + num / den, lo, hi);
        if (mean == cur[v]) {
            next[v] = cur[v];
            continue;
        }
        const double mixed = damping * cur[v] + (1.0 - damping) * mean;
        next[v] = std::clamp(mixed, std::min(mean, cur[v]), std::max(mean, cur[v]));
    }
}

void relax_trial(const BipartiteGraph& g, std::span<const double> inv_degree,
                 std::span<double> row, std::size_t iterations, double damping) {
    std::vector<double> buffer(row.size());
    std::span<double> cur = row;
    std::span<double> next = buffer;
    for (std::size_t k = 0; k < iterations; ++k) {
        sweep(g, inv_degree, cur, next, damping);
        std::swap(cur, next);
    }
    if (cur.data() != row.data()) {
        std::copy(cur.begin(), cur.end(), row.begin());
    }
}

}  // namespace

void jor_sweep(const BipartiteGraph& g, std::span<const double> current, std::span<double> next,
               double damping) {
    if (current.size() != g.vertex_count() || next.size() != g.vertex_count()) {
        throw ShapeError("sweep buffers must have one entry per vertex");
    }
    const auto inv = inverse_degrees(g);
    sweep(g, inv, current, next, damping);
}

AlgebraicCoordinates jor_relax_from(const BipartiteGraph& g, std::vector<double> initial,
                                    const JorParams& params) {
    check_params(g, params);
    if (initial.size() != params.trials * g.vertex_count()) {
        throw ShapeError("initial vectors must be trials x vertices");
    }
    const auto inv = inverse_degrees(g);
    const std::size_t n = g.vertex_count();
    for (std::size_t r = 0; r < params.trials; ++r) {
        relax_trial(g, inv, std::span<double>(initial.data() + r * n, n), params.iterations,
                    params.damping);
    }
    return AlgebraicCoordinates(g.nodes_a(), g.nodes_b(), params, std::move(initial));
}

AlgebraicCoordinates jor_relax(const BipartiteGraph& g, const JorParams& params,
                               unsigned threads) {
    check_params(g, params);
    const auto inv = inverse_degrees(g);
    const std::size_t n = g.vertex_count();
    std::vector<double> values(params.trials * n);
    detail::parallel_chunks(params.trials, threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng(derive_seed(params.seed, r));
            std::span<double> row(values.data() + r * n, n);
            for (auto& x : row) x = rng.uniform01();
            relax_trial(g, inv, row, params.iterations, params.damping);
        }
    });
    return AlgebraicCoordinates(g.nodes_a(), g.nodes_b(), params, std::move(values));
}

double alg_distance(const AlgebraicCoordinates& coords, Vertex i, Vertex j) {
    if (i >= coords.vertex_count() || j >= coords.vertex_count()) {
        throw LookupError("vertex is not in the coordinate table");
    }
    double sum = 0.0;
    for (std::size_t r = 0; r < coords.trials(); ++r) {
        const double d = coords.at(r, i) - coords.at(r, j);
        sum += d * d;
    }
    return std::sqrt(sum);
}

double alg_distance(const AlgebraicCoordinates& coords, NodeId i, NodeId j) {
    return alg_distance(coords, coords.vertex(i), coords.vertex(j));
}

double alg_similarity(const AlgebraicCoordinates& coords, Vertex i, Vertex j) {
    const double root = std::sqrt(static_cast<double>(coords.trials()));
    return std::clamp((root - alg_distance(coords, i, j)) / root, 0.0, 1.0);
}

double alg_similarity(const AlgebraicCoordinates& coords, NodeId i, NodeId j) {
    return alg_similarity(coords, coords.vertex(i), coords.vertex(j));
}

EdgeSimilarities::EdgeSimilarities(const BipartiteGraph& g, std::vector<double> slots)
    : slots_(std::move(slots)) {
    if (slots_.size() != g.adjacency_size()) {
        throw ShapeError("one similarity per adjacency slot is required");
    }
    offsets_.resize(g.vertex_count() + 1);
    for (Vertex v = 0; v <= g.vertex_count(); ++v) {
        offsets_[v] = v < g.vertex_count() ? g.adjacency_offset(v) : g.adjacency_size();
    }
}

double EdgeSimilarities::at(const BipartiteGraph& g, const Edge& e) const {
    const Vertex va = g.vertex_a(e.a);
    const auto nb = g.neighbors(va);
    const auto it = std::lower_bound(nb.begin(), nb.end(), g.vertex_b(e.b));
    if (it == nb.end() || *it != g.vertex_b(e.b)) {
        throw LookupError("edge has no similarity");
    }
    return of(va)[static_cast<std::size_t>(it - nb.begin())];
}

EdgeSimilarities edge_similarities(const BipartiteGraph& g, const AlgebraicCoordinates& coords) {
    if (coords.vertex_count() != g.vertex_count()) {
        throw ShapeError("coordinates were computed on a different graph");
    }
    std::vector<double> slots(g.adjacency_size());
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const auto nb = g.neighbors(v);
        const std::size_t base = g.adjacency_offset(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            slots[base + k] = alg_similarity(coords, v, nb[k]);
        }
    }
    return EdgeSimilarities(g, std::move(slots));
}

void write_coordinates(std::ostream& out, const BipartiteGraph& g,
                       const AlgebraicCoordinates& coords) {
    const auto& p = coords.params();
    out << "# R=" << p.trials << " K=" << p.iterations
        << " lambda=" << detail::format_double(p.damping) << " seed=" << p.seed << '\n';
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        out << g.name(v);
        for (std::size_t r = 0; r < coords.trials(); ++r) {
            out << ' ' << detail::format_double(coords.at(r, v));
        }
        out << '\n';
    }
}

AlgebraicCoordinates read_coordinates(std::istream& in, const BipartiteGraph& g) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty coordinate file");
    JorParams p;
    bool have[4] = {false, false, false, false};
    for (const auto f : detail::split_ws(detail::trim_cr(line))) {
        if (f.substr(0, 2) == "R=") {
            if (auto x = detail::parse_uint(f.substr(2))) p.trials = *x, have[0] = true;
        } else if (f.substr(0, 2) == "K=") {
            if (auto x = detail::parse_uint(f.substr(2))) p.iterations = *x, have[1] = true;
        } else if (f.substr(0, 7) == "lambda=") {
            if (auto x = detail::parse_double(f.substr(7))) p.damping = *x, have[2] = true;
        } else if (f.substr(0, 5) == "seed=") {
            if (auto x = detail::parse_uint(f.substr(5))) p.seed = *x, have[3] = true;
        }
    }
    if (!(have[0] && have[1] && have[2] && have[3])) {
        throw ParseError(1, "coordinate header must record R, K, lambda and seed");
    }
    const std::size_t n = g.vertex_count();
    std::vector<double> values(p.trials * n, 0.0);
    std::vector<bool> seen(n, false);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = detail::split_ws(detail::trim_cr(line));
        if (fields.empty()) continue;
        if (fields.size() != p.trials + 1) {
            throw ParseError(line_no, "expected an id and " + std::to_string(p.trials) + " values");
        }
        const auto v = g.find(fields[0]);
        if (!v) throw LookupError("coordinate row names unknown node '" + std::string(fields[0]) + "'");
        for (std::size_t r = 0; r < p.trials; ++r) {
            const auto x = detail::parse_double(fields[r + 1]);
            if (!x) throw ParseError(line_no, "invalid coordinate");
            values[r * n + *v] = *x;
        }
        seen[*v] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw ParseError(line_no, "coordinate file does not cover every node");
    }
    return AlgebraicCoordinates(g.nodes_a(), g.nodes_b(), p, std::move(values));
}

}  // namespace bipembed
