#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bipembed/graph.hpp"

namespace bipembed {

struct JorParams {
    std::size_t trials = 10;      // R
    std::size_t iterations = 20;  // K
    double damping = 0.5;         // lambda
    std::uint64_t seed = 0;
};

/// Relaxed test vectors: one row of |V| coordinates per trial, every entry
/// in [0, 1].
class AlgebraicCoordinates {
public:
    AlgebraicCoordinates() = default;
    AlgebraicCoordinates(std::size_t nodes_a, std::size_t nodes_b, JorParams params,
                         std::vector<double> values);

    std::size_t trials() const noexcept { return params_.trials; }
    std::size_t vertex_count() const noexcept { return nodes_a_ + nodes_b_; }
    std::size_t nodes_a() const noexcept { return nodes_a_; }
    std::size_t nodes_b() const noexcept { return nodes_b_; }
    const JorParams& params() const noexcept { return params_; }

    std::span<const double> trial(std::size_t r) const {
        return {values_.data() + r * vertex_count(), vertex_count()};
    }
    double at(std::size_t r, Vertex v) const { return values_[r * vertex_count() + v]; }
    const std::vector<double>& values() const noexcept { return values_; }

    /// Global vertex for a typed node; throws LookupError when absent.
    Vertex vertex(NodeId n) const;

private:
    std::size_t nodes_a_ = 0;
    std::size_t nodes_b_ = 0;
    JorParams params_;
    std::vector<double> values_;
};

/// One simultaneous JOR sweep: next(v) = damping*cur(v) + (1-damping) times
/// the inverse-degree weighted mean of cur over v's neighbors. Isolated
/// vertices keep their value.
void jor_sweep(const BipartiteGraph& g, std::span<const double> current, std::span<double> next,
               double damping);

/// R independent trials from uniform [0,1] initializations, K sweeps each.
/// Trials run on up to `threads` workers; results do not depend on it.
AlgebraicCoordinates jor_relax(const BipartiteGraph& g, const JorParams& params,
                               unsigned threads = 1);

/// Relaxes caller-supplied initial vectors (trial-major, trials x |V|).
AlgebraicCoordinates jor_relax_from(const BipartiteGraph& g, std::vector<double> initial,
                                    const JorParams& params);

double alg_distance(const AlgebraicCoordinates& coords, Vertex i, Vertex j);
double alg_distance(const AlgebraicCoordinates& coords, NodeId i, NodeId j);

/// (sqrt(R) - d) / sqrt(R), in [0, 1].
double alg_similarity(const AlgebraicCoordinates& coords, Vertex i, Vertex j);
double alg_similarity(const AlgebraicCoordinates& coords, NodeId i, NodeId j);

/// Algebraic similarity of every edge, stored per adjacency slot so that the
/// value for (v, neighbors(v)[k]) is of(v)[k].
class EdgeSimilarities {
public:
    EdgeSimilarities() = default;
    EdgeSimilarities(const BipartiteGraph& g, std::vector<double> slots);

    std::span<const double> of(Vertex v) const {
        return {slots_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    /// Similarity of edge (a, b) in part-local indices; LookupError if absent.
    double at(const BipartiteGraph& g, const Edge& e) const;
    std::size_t edge_count() const noexcept { return slots_.size() / 2; }
    bool empty() const noexcept { return slots_.empty(); }
    const std::vector<double>& slots() const noexcept { return slots_; }

private:
    std::vector<std::size_t> offsets_{0};
    std::vector<double> slots_;
};

EdgeSimilarities edge_similarities(const BipartiteGraph& g, const AlgebraicCoordinates& coords);

/// Text matrix: header with R/K/lambda/seed, then `<id> c_1 ... c_R` per node.
void write_coordinates(std::ostream& out, const BipartiteGraph& g,
                       const AlgebraicCoordinates& coords);
AlgebraicCoordinates read_coordinates(std::istream& in, const BipartiteGraph& g);

}  // namespace bipembed
