#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bipembed/random.hpp"

namespace bipembed {

enum class Part : std::uint8_t { A, B };

constexpr Part other(Part p) noexcept { return p == Part::A ? Part::B : Part::A; }
std::string_view to_string(Part p) noexcept;

/// Typed node handle: a dense index within its part.
struct NodeId {
    std::uint32_t index = 0;
    Part part = Part::A;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Dense global vertex index. Part A occupies [0, |A|), part B [|A|, |A|+|B|).
using Vertex = std::uint32_t;

/// Cross-part edge in part-local indices.
struct Edge {
    std::uint32_t a = 0;
    std::uint32_t b = 0;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

constexpr std::uint64_t edge_key(const Edge& e) noexcept {
    return (static_cast<std::uint64_t>(e.a) << 32) | e.b;
}

/// Immutable bipartite graph in CSR form with sorted adjacency and an
/// external string id per node.
class BipartiteGraph {
public:
    BipartiteGraph() = default;

    /// Builds a graph from part-local edges. Duplicates are collapsed. Empty
    /// name lists produce generated ids ("a<i>", "b<j>").
    static BipartiteGraph from_edges(std::size_t nodes_a, std::size_t nodes_b,
                                     std::vector<Edge> edges,
                                     std::vector<std::string> names_a = {},
                                     std::vector<std::string> names_b = {});

    std::size_t nodes_a() const noexcept { return nodes_a_; }
    std::size_t nodes_b() const noexcept { return nodes_b_; }
    std::size_t count(Part p) const noexcept { return p == Part::A ? nodes_a_ : nodes_b_; }
    std::size_t vertex_count() const noexcept { return nodes_a_ + nodes_b_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    bool empty() const noexcept { return vertex_count() == 0; }

    Part part_of(Vertex v) const noexcept { return v < nodes_a_ ? Part::A : Part::B; }
    Vertex vertex(NodeId n) const;
    Vertex vertex_a(std::uint32_t a) const noexcept { return a; }
    Vertex vertex_b(std::uint32_t b) const noexcept { return static_cast<Vertex>(nodes_a_ + b); }
    NodeId node(Vertex v) const noexcept;
    /// First vertex of a part and one past its last.
    Vertex part_begin(Part p) const noexcept { return p == Part::A ? 0 : static_cast<Vertex>(nodes_a_); }
    Vertex part_end(Part p) const noexcept {
        return p == Part::A ? static_cast<Vertex>(nodes_a_) : static_cast<Vertex>(vertex_count());
    }

    std::span<const Vertex> neighbors(Vertex v) const noexcept {
        return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
    }
    std::size_t degree(Vertex v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
    /// Position of v's adjacency inside the flat CSR target array.
    std::size_t adjacency_offset(Vertex v) const noexcept { return offsets_[v]; }
    std::size_t adjacency_size() const noexcept { return targets_.size(); }

    bool has_edge(std::uint32_t a, std::uint32_t b) const noexcept;
    bool has_edge(const Edge& e) const noexcept { return has_edge(e.a, e.b); }
    /// Edges sorted by (a, b).
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    const std::string& name(Vertex v) const { return names_[v]; }
    const std::string& name(NodeId n) const { return names_[vertex(n)]; }
    std::optional<Vertex> find(std::string_view id) const;

private:
    std::size_t nodes_a_ = 0;
    std::size_t nodes_b_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<Vertex> targets_;
    std::vector<Edge> edges_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, Vertex> index_;
};

/// Graph plus one real weight per edge (parallel to graph.edges()).
struct RatingGraph {
    BipartiteGraph graph;
    std::vector<double> weights;

    double weight(const Edge& e) const;
};

/// Reads `a_id<TAB>b_id[<TAB>weight]` lines; `#` starts a comment line.
/// Node ids are assigned per part in first-seen order.
BipartiteGraph load_edge_list(std::istream& in);

/// Same format with a mandatory rating column. Duplicate pairs keep the first
/// rating. With log_scale, ratings become log(1 + rating).
RatingGraph load_rating_list(std::istream& in, bool log_scale = false);

void write_edge_list(std::ostream& out, const BipartiteGraph& g);
void write_edge_list(std::ostream& out, const BipartiteGraph& g, std::span<const Edge> edges);

/// Iteratively drops nodes whose degree is below min_degree, then relabels.
BipartiteGraph degree_prune(const BipartiteGraph& g, std::size_t min_degree);

/// Induced subgraph on a subset of edges, keeping every node and its id.
BipartiteGraph with_edges(const BipartiteGraph& g, std::vector<Edge> edges);

std::size_t component_count(const BipartiteGraph& g);

struct HoldoutSplit {
    BipartiteGraph training_graph;
    std::vector<Edge> removed_edges;
    std::vector<Edge> negative_edges;
    double holdout = 0.0;
    std::uint64_t seed = 0;
};

/// Visits edges in seeded random order and removes each with probability h
/// unless the removal would increase the component count. Negatives match
/// the removed count, capped by the number of non-edges.
HoldoutSplit holdout_split(const BipartiteGraph& g, double h, std::uint64_t seed);

void write_split_manifest(std::ostream& out, const HoldoutSplit& split);
HoldoutSplit read_split_manifest(std::istream& in);

/// Uniform distinct cross-part pairs that are not edges of g. Pairs listed in
/// `exclude` are also avoided.
std::vector<Edge> sample_negative_pairs(const BipartiteGraph& g, std::size_t count,
                                        std::uint64_t seed);
std::vector<Edge> sample_negative_pairs(const BipartiteGraph& g, std::size_t count, Rng& rng,
                                        std::span<const Edge> exclude = {});

enum class KhopMode : std::uint8_t {
    /// Uniform neighbor at every step.
    Walk,
    /// Uniform over the materialized k-hop set.
    UniformSet,
};

/// Endpoint of a `hops`-step neighborhood draw from v (hops in {1, 2, 3}).
Vertex sample_khop(const BipartiteGraph& g, Vertex v, int hops, Rng& rng,
                   KhopMode mode = KhopMode::Walk);
NodeId sample_khop(const BipartiteGraph& g, NodeId v, int hops, Rng& rng,
                   KhopMode mode = KhopMode::Walk);

/// Nodes reachable by walks of exactly `hops` steps, sorted.
std::vector<Vertex> khop_set(const BipartiteGraph& g, Vertex v, int hops);

/// True iff the two (same-part) vertices share a neighbor.
bool neighborhoods_intersect(const BipartiteGraph& g, Vertex i, Vertex j) noexcept;

}  // namespace bipembed
