#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "bipembed/graph.hpp"
#include "bipembed/random.hpp"

namespace testing {

using bipembed::BipartiteGraph;
using bipembed::Edge;

inline BipartiteGraph random_graph(std::uint32_t na, std::uint32_t nb, double p,
                                   std::uint64_t seed) {
    bipembed::Rng rng(seed);
    std::vector<Edge> edges;
    for (std::uint32_t a = 0; a < na; ++a)
        for (std::uint32_t b = 0; b < nb; ++b)
            if (rng.bernoulli(p)) edges.push_back({a, b});
    return BipartiteGraph::from_edges(na, nb, edges);
}

/// Two equal blocks per part; block of node i is i / (n / 2).
inline BipartiteGraph two_block_sbm(std::uint32_t n, double p_in, double p_out,
                                    std::uint64_t seed) {
    bipembed::Rng rng(seed);
    std::vector<Edge> edges;
    const std::uint32_t half = n / 2;
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = 0; b < n; ++b)
            if (rng.bernoulli(a / half == b / half ? p_in : p_out)) edges.push_back({a, b});
    return BipartiteGraph::from_edges(n, n, edges);
}

inline BipartiteGraph complete(std::uint32_t na, std::uint32_t nb) {
    std::vector<Edge> edges;
    for (std::uint32_t a = 0; a < na; ++a)
        for (std::uint32_t b = 0; b < nb; ++b) edges.push_back({a, b});
    return BipartiteGraph::from_edges(na, nb, edges);
}

/// Path a0-b0-a1-b1-...; every edge is a bridge.
inline BipartiteGraph path(std::uint32_t na) {
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < na; ++i) {
        edges.push_back({i, i});
        if (i + 1 < na) edges.push_back({i + 1, i});
    }
    return BipartiteGraph::from_edges(na, na, edges);
}

/// Two K_{5,5} blocks joined by the edge (a4, b5).
inline BipartiteGraph two_k55_bridge() {
    std::vector<Edge> edges;
    for (std::uint32_t blk = 0; blk < 2; ++blk)
        for (std::uint32_t a = 0; a < 5; ++a)
            for (std::uint32_t b = 0; b < 5; ++b) edges.push_back({blk * 5 + a, blk * 5 + b});
    edges.push_back({4, 5});
    return BipartiteGraph::from_edges(10, 10, edges);
}

inline BipartiteGraph parse(const std::string& text) {
    std::istringstream in(text);
    return bipembed::load_edge_list(in);
}

}  // namespace testing
