#include "bipembed/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "bipembed/error.hpp"
#include "text_util.hpp"

namespace bipembed {

std::string_view to_string(Part p) noexcept { return p == Part::A ? "A" : "B"; }

BipartiteGraph BipartiteGraph::from_edges(std::size_t nodes_a, std::size_t nodes_b,
                                          std::vector<Edge> edges,
                                          std::vector<std::string> names_a,
                                          std::vector<std::string> names_b) {
    BipartiteGraph g;
    g.nodes_a_ = nodes_a;
    g.nodes_b_ = nodes_b;

    for (const auto& e : edges) {
        if (e.a >= nodes_a || e.b >= nodes_b) {
            throw ParameterError("edge endpoint out of range");
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const std::size_t n = nodes_a + nodes_b;
    std::vector<std::size_t> degree(n, 0);
    for (const auto& e : edges) {
        ++degree[e.a];
        ++degree[nodes_a + e.b];
    }
    g.offsets_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        g.offsets_[v + 1] = g.offsets_[v] + degree[v];
    }
    g.targets_.resize(g.offsets_[n]);
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    // Edges are sorted by (a, b), so A rows come out sorted; B rows receive
    // their A neighbors in increasing order as well.
    for (const auto& e : edges) {
        const auto vb = static_cast<Vertex>(nodes_a + e.b);
        g.targets_[fill[e.a]++] = vb;
        g.targets_[fill[vb]++] = e.a;
    }
    g.edges_ = std::move(edges);

    if (names_a.empty()) {
        for (std::size_t i = 0; i < nodes_a; ++i) names_a.push_back("a" + std::to_string(i));
    }
    if (names_b.empty()) {
        for (std::size_t j = 0; j < nodes_b; ++j) names_b.push_back("b" + std::to_string(j));
    }
    if (names_a.size() != nodes_a || names_b.size() != nodes_b) {
        throw ParameterError("name table size does not match node count");
    }
    g.names_ = std::move(names_a);
    g.names_.insert(g.names_.end(), std::make_move_iterator(names_b.begin()),
                    std::make_move_iterator(names_b.end()));
    g.index_.reserve(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (!g.index_.emplace(g.names_[v], static_cast<Vertex>(v)).second) {
            throw BipartiteViolation("duplicate node id '" + g.names_[v] + "'");
        }
    }
    return g;
}

Vertex BipartiteGraph::vertex(NodeId n) const {
    if (n.index >= count(n.part)) {
        throw LookupError("node " + std::string(to_string(n.part)) + std::to_string(n.index) +
                          " is not in the graph");
    }
    return n.part == Part::A ? n.index : static_cast<Vertex>(nodes_a_ + n.index);
}

NodeId BipartiteGraph::node(Vertex v) const noexcept {
    if (v < nodes_a_) {
        return {v, Part::A};
    }
    return {static_cast<std::uint32_t>(v - nodes_a_), Part::B};
}

bool BipartiteGraph::has_edge(std::uint32_t a, std::uint32_t b) const noexcept {
    if (a >= nodes_a_ || b >= nodes_b_) {
        return false;
    }
    const auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), static_cast<Vertex>(nodes_a_ + b));
}

std::optional<Vertex> BipartiteGraph::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

double RatingGraph::weight(const Edge& e) const {
    const auto& edges = graph.edges();
    const auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) {
        throw LookupError("edge is not rated");
    }
    return weights[static_cast<std::size_t>(it - edges.begin())];
}

namespace {

struct RawEdges {
    std::vector<std::string> names_a;
    std::vector<std::string> names_b;
    std::vector<Edge> edges;
    std::vector<double> weights;  // parallel to edges, in input order
};

RawEdges read_raw(std::istream& in, bool require_weight) {
    RawEdges raw;
    std::unordered_map<std::string, std::uint32_t> ids_a;
    std::unordered_map<std::string, std::uint32_t> ids_b;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim_cr(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        const auto fields = detail::split(text, '\t');
        if (fields.size() < 2 || fields.size() > 3) {
            throw ParseError(line_no, "expected 2 or 3 tab-separated fields");
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError(line_no, "empty node id");
        }
        double weight = 1.0;
        if (fields.size() == 3) {
            const auto w = detail::parse_double(fields[2]);
            if (!w || !std::isfinite(*w)) {
                throw ParseError(line_no, "invalid weight '" + std::string(fields[2]) + "'");
            }
            weight = *w;
        } else if (require_weight) {
            throw ParseError(line_no, "missing rating column");
        }
        std::string a(fields[0]);
        std::string b(fields[1]);
        if (ids_b.count(a) != 0) {
            throw BipartiteViolation("line " + std::to_string(line_no) + ": id '" + a +
                                     "' appears in both columns");
        }
        if (ids_a.count(b) != 0 || a == b) {
            throw BipartiteViolation("line " + std::to_string(line_no) + ": id '" + b +
                                     "' appears in both columns");
        }
        auto [ia, new_a] = ids_a.emplace(a, static_cast<std::uint32_t>(raw.names_a.size()));
        if (new_a) raw.names_a.push_back(std::move(a));
        auto [ib, new_b] = ids_b.emplace(b, static_cast<std::uint32_t>(raw.names_b.size()));
        if (new_b) raw.names_b.push_back(std::move(b));
        raw.edges.push_back({ia->second, ib->second});
        raw.weights.push_back(weight);
    }
    return raw;
}

}  // namespace

BipartiteGraph load_edge_list(std::istream& in) {
    auto raw = read_raw(in, false);
    const auto na = raw.names_a.size();
    const auto nb = raw.names_b.size();
    return BipartiteGraph::from_edges(na, nb, std::move(raw.edges), std::move(raw.names_a),
                                      std::move(raw.names_b));
}

RatingGraph load_rating_list(std::istream& in, bool log_scale) {
    auto raw = read_raw(in, true);
    // First rating wins for duplicate pairs.
    std::unordered_map<std::uint64_t, double> first;
    for (std::size_t i = 0; i < raw.edges.size(); ++i) {
        first.emplace(edge_key(raw.edges[i]), raw.weights[i]);
    }
    const auto na = raw.names_a.size();
    const auto nb = raw.names_b.size();
    RatingGraph out;
    out.graph = BipartiteGraph::from_edges(na, nb, std::move(raw.edges), std::move(raw.names_a),
                                           std::move(raw.names_b));
    out.weights.reserve(out.graph.edge_count());
    for (const auto& e : out.graph.edges()) {
        const double w = first.at(edge_key(e));
        out.weights.push_back(log_scale ? std::log1p(std::max(w, 0.0)) : w);
    }
    return out;
}

void write_edge_list(std::ostream& out, const BipartiteGraph& g) {
    write_edge_list(out, g, g.edges());
}

void write_edge_list(std::ostream& out, const BipartiteGraph& g, std::span<const Edge> edges) {
    for (const auto& e : edges) {
        out << g.name(g.vertex_a(e.a)) << '\t' << g.name(g.vertex_b(e.b)) << '\n';
    }
}

BipartiteGraph with_edges(const BipartiteGraph& g, std::vector<Edge> edges) {
    std::vector<std::string> names_a;
    std::vector<std::string> names_b;
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        (g.part_of(v) == Part::A ? names_a : names_b).push_back(g.name(v));
    }
    return BipartiteGraph::from_edges(g.nodes_a(), g.nodes_b(), std::move(edges),
                                      std::move(names_a), std::move(names_b));
}

BipartiteGraph degree_prune(const BipartiteGraph& g, std::size_t min_degree) {
    const std::size_t n = g.vertex_count();
    std::vector<std::size_t> degree(n);
    std::vector<bool> alive(n, true);
    std::vector<Vertex> queue;
    for (Vertex v = 0; v < n; ++v) {
        degree[v] = g.degree(v);
        if (degree[v] < min_degree) {
            alive[v] = false;
            queue.push_back(v);
        }
    }
    while (!queue.empty()) {
        const Vertex v = queue.back();
        queue.pop_back();
        for (const Vertex u : g.neighbors(v)) {
            if (alive[u] && --degree[u] < min_degree) {
                alive[u] = false;
                queue.push_back(u);
            }
        }
    }

    std::vector<std::uint32_t> relabel(n, 0);
    std::vector<std::string> names_a;
    std::vector<std::string> names_b;
    for (Vertex v = 0; v < n; ++v) {
        if (!alive[v]) continue;
        auto& names = g.part_of(v) == Part::A ? names_a : names_b;
        relabel[v] = static_cast<std::uint32_t>(names.size());
        names.push_back(g.name(v));
    }
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) {
        const Vertex va = g.vertex_a(e.a);
        const Vertex vb = g.vertex_b(e.b);
        if (alive[va] && alive[vb]) {
            edges.push_back({relabel[va], relabel[vb]});
        }
    }
    if (edges.empty()) {
        throw EmptyGraphError("degree pruning removed every edge");
    }
    const auto na = names_a.size();
    const auto nb = names_b.size();
    return BipartiteGraph::from_edges(na, nb, std::move(edges), std::move(names_a),
                                      std::move(names_b));
}

namespace {

struct DisjointSets {
    std::vector<Vertex> parent;

    explicit DisjointSets(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), Vertex{0});
    }
    Vertex find(Vertex x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(Vertex x, Vertex y) {
        x = find(x);
        y = find(y);
        if (x != y) parent[std::max(x, y)] = std::min(x, y);
    }
};

/// Mutable adjacency supporting edge deletion and a bidirectional
/// reachability probe that ignores one edge.
class DynamicAdjacency {
public:
    explicit DynamicAdjacency(const BipartiteGraph& g)
        : adj_(g.vertex_count()), stamp_(g.vertex_count(), 0), side_(g.vertex_count(), 0) {
        for (Vertex v = 0; v < g.vertex_count(); ++v) {
            const auto nb = g.neighbors(v);
            adj_[v].assign(nb.begin(), nb.end());
        }
    }

    void remove(Vertex u, Vertex v) {
        erase_one(adj_[u], v);
        erase_one(adj_[v], u);
    }

    /// Whether u and v stay connected once the edge u-v is ignored. Expands
    /// both frontiers alternately, so a bridge costs only the smaller side.
    bool connected_without(Vertex u, Vertex v) {
        ++epoch_;
        queue_[0].assign(1, u);
        queue_[1].assign(1, v);
        std::size_t head[2] = {0, 0};
        stamp_[u] = epoch_;
        side_[u] = 0;
        stamp_[v] = epoch_;
        side_[v] = 1;
        for (;;) {
            for (int s = 0; s < 2; ++s) {
                auto& q = queue_[s];
                if (head[s] == q.size()) {
                    return false;
                }
                const Vertex x = q[head[s]++];
                for (const Vertex y : adj_[x]) {
                    if ((x == u && y == v) || (x == v && y == u)) continue;
                    if (stamp_[y] == epoch_) {
                        if (side_[y] != s) return true;
                        continue;
                    }
                    stamp_[y] = epoch_;
                    side_[y] = static_cast<std::uint8_t>(s);
                    q.push_back(y);
                }
            }
        }
    }

private:
    static void erase_one(std::vector<Vertex>& list, Vertex x) {
        const auto it = std::find(list.begin(), list.end(), x);
        if (it != list.end()) {
            *it = list.back();
            list.pop_back();
        }
    }

    std::vector<std::vector<Vertex>> adj_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint8_t> side_;
    std::uint32_t epoch_ = 0;
    std::vector<Vertex> queue_[2];
};

}  // namespace

std::size_t component_count(const BipartiteGraph& g) {
    DisjointSets sets(g.vertex_count());
    for (const auto& e : g.edges()) {
        sets.unite(g.vertex_a(e.a), g.vertex_b(e.b));
    }
    std::size_t count = 0;
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        if (sets.find(v) == v) ++count;
    }
    return count;
}

HoldoutSplit holdout_split(const BipartiteGraph& g, double h, std::uint64_t seed) {
    if (!(h >= 0.0 && h <= 1.0)) {
        throw ParameterError("holdout ratio h must lie in [0, 1]");
    }
    Rng rng(derive_seed(seed, 0));
    std::vector<Edge> order = g.edges();
    rng.shuffle(order.begin(), order.end());

    DynamicAdjacency adj(g);
    std::vector<Edge> removed;
    for (const auto& e : order) {
        if (!rng.bernoulli(h)) continue;
        const Vertex va = g.vertex_a(e.a);
        const Vertex vb = g.vertex_b(e.b);
        if (adj.connected_without(va, vb)) {
            adj.remove(va, vb);
            removed.push_back(e);
        }
    }

    std::vector<Edge> kept;
    kept.reserve(g.edge_count() - removed.size());
    {
        std::unordered_set<std::uint64_t> gone;
        for (const auto& e : removed) gone.insert(edge_key(e));
        for (const auto& e : g.edges()) {
            if (gone.count(edge_key(e)) == 0) kept.push_back(e);
        }
    }

    HoldoutSplit split;
    split.training_graph = with_edges(g, std::move(kept));
    // Dense graphs may have fewer non-edges than removed edges.
    const std::size_t non_edges =
        static_cast<std::size_t>(g.nodes_a()) * g.nodes_b() - g.edge_count();
    split.negative_edges =
        sample_negative_pairs(g, std::min(removed.size(), non_edges), derive_seed(seed, 1));
    split.removed_edges = std::move(removed);
    split.holdout = h;
    split.seed = seed;
    return split;
}

void write_split_manifest(std::ostream& out, const HoldoutSplit& split) {
    const auto& g = split.training_graph;
    out << "# holdout h=" << detail::format_double(split.holdout) << " seed=" << split.seed
        << '\n';
    out << "[train]\n";
    write_edge_list(out, g);
    out << "[removed]\n";
    write_edge_list(out, g, split.removed_edges);
    out << "[negatives]\n";
    write_edge_list(out, g, split.negative_edges);
}

HoldoutSplit read_split_manifest(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) {
        throw ParseError(1, "empty split manifest");
    }
    HoldoutSplit split;
    {
        const auto fields = detail::split_ws(detail::trim_cr(line));
        bool have_h = false;
        bool have_seed = false;
        for (const auto f : fields) {
            if (f.substr(0, 2) == "h=") {
                const auto h = detail::parse_double(f.substr(2));
                if (!h) throw ParseError(1, "bad holdout value");
                split.holdout = *h;
                have_h = true;
            } else if (f.substr(0, 5) == "seed=") {
                const auto s = detail::parse_uint(f.substr(5));
                if (!s) throw ParseError(1, "bad seed value");
                split.seed = *s;
                have_seed = true;
            }
        }
        if (fields.empty() || fields[0] != "#" || !have_h || !have_seed) {
            throw ParseError(1, "manifest header must record h and seed");
        }
    }

    std::string sections[3];
    int current = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim_cr(line);
        if (text == "[train]") {
            current = 0;
        } else if (text == "[removed]") {
            current = 1;
        } else if (text == "[negatives]") {
            current = 2;
        } else if (current < 0) {
            if (!text.empty()) throw ParseError(line_no, "edge outside of a section");
        } else {
            sections[current].append(text).push_back('\n');
        }
    }
    if (current != 2) {
        throw ParseError(line_no, "manifest is missing a section");
    }

    std::istringstream train(sections[0]);
    split.training_graph = load_edge_list(train);
    const auto& g = split.training_graph;
    auto resolve = [&g](const std::string& body, std::vector<Edge>& out) {
        std::istringstream s(body);
        std::string l;
        while (std::getline(s, l)) {
            const auto f = detail::split(l, '\t');
            const auto a = g.find(f[0]);
            const auto b = f.size() > 1 ? g.find(f[1]) : std::nullopt;
            if (!a || !b || g.part_of(*a) != Part::A || g.part_of(*b) != Part::B) {
                throw LookupError("manifest edge '" + l + "' names unknown nodes");
            }
            out.push_back({g.node(*a).index, g.node(*b).index});
        }
    };
    resolve(sections[1], split.removed_edges);
    resolve(sections[2], split.negative_edges);
    return split;
}

std::vector<Edge> sample_negative_pairs(const BipartiteGraph& g, std::size_t count,
                                        std::uint64_t seed) {
    Rng rng(seed);
    return sample_negative_pairs(g, count, rng);
}

std::vector<Edge> sample_negative_pairs(const BipartiteGraph& g, std::size_t count, Rng& rng,
                                        std::span<const Edge> exclude) {
    if (count == 0) {
        return {};
    }
    const std::uint64_t total = static_cast<std::uint64_t>(g.nodes_a()) * g.nodes_b();
    std::unordered_set<std::uint64_t> forbidden;
    for (const auto& e : exclude) {
        if (!g.has_edge(e)) forbidden.insert(edge_key(e));
    }
    const std::uint64_t non_edges = total - g.edge_count();
    if (non_edges == 0) {
        throw NoNegativesError("graph is complete bipartite; no negative pairs exist");
    }
    const std::uint64_t available = non_edges - forbidden.size();
    if (count > available) {
        throw ExhaustionError("requested " + std::to_string(count) + " negative pairs but only " +
                              std::to_string(available) + " exist");
    }

    std::vector<Edge> out;
    out.reserve(count);
    if (2 * count > available && total <= 50'000'000ULL) {
        // Dense request: enumerate and partially shuffle.
        std::vector<Edge> pool;
        pool.reserve(available);
        for (std::uint32_t a = 0; a < g.nodes_a(); ++a) {
            for (std::uint32_t b = 0; b < g.nodes_b(); ++b) {
                const Edge e{a, b};
                if (!g.has_edge(e) && forbidden.count(edge_key(e)) == 0) pool.push_back(e);
            }
        }
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }
    std::unordered_set<std::uint64_t> chosen;
    while (out.size() < count) {
        const Edge e{static_cast<std::uint32_t>(rng.below(g.nodes_a())),
                     static_cast<std::uint32_t>(rng.below(g.nodes_b()))};
        const auto key = edge_key(e);
        if (g.has_edge(e) || forbidden.count(key) != 0 || !chosen.insert(key).second) continue;
        out.push_back(e);
    }
    return out;
}

std::vector<Vertex> khop_set(const BipartiteGraph& g, Vertex v, int hops) {
    std::vector<Vertex> frontier{v};
    std::vector<std::uint8_t> seen(g.vertex_count(), 0);
    for (int step = 0; step < hops; ++step) {
        std::vector<Vertex> next;
        for (const Vertex x : frontier) {
            for (const Vertex y : g.neighbors(x)) {
                if (!seen[y]) {
                    seen[y] = 1;
                    next.push_back(y);
                }
            }
        }
        for (const Vertex y : next) seen[y] = 0;
        frontier = std::move(next);
    }
    std::sort(frontier.begin(), frontier.end());
    return frontier;
}

Vertex sample_khop(const BipartiteGraph& g, Vertex v, int hops, Rng& rng, KhopMode mode) {
    if (hops < 1 || hops > 3) {
        throw ParameterError("hops must be 1, 2 or 3");
    }
    if (v >= g.vertex_count()) {
        throw LookupError("vertex out of range");
    }
    if (g.degree(v) == 0) {
        throw NoNeighborError("node '" + g.name(v) + "' has no neighbors");
    }
    if (mode == KhopMode::UniformSet) {
        const auto set = khop_set(g, v, hops);
        return set[rng.below(set.size())];
    }
    Vertex cur = v;
    for (int step = 0; step < hops; ++step) {
        const auto nb = g.neighbors(cur);
        cur = nb[rng.below(nb.size())];
    }
    return cur;
}

NodeId sample_khop(const BipartiteGraph& g, NodeId v, int hops, Rng& rng, KhopMode mode) {
    return g.node(sample_khop(g, g.vertex(v), hops, rng, mode));
}

bool neighborhoods_intersect(const BipartiteGraph& g, Vertex i, Vertex j) noexcept {
    const auto x = g.neighbors(i);
    const auto y = g.neighbors(j);
    auto p = x.begin();
    auto q = y.begin();
    while (p != x.end() && q != y.end()) {
        if (*p < *q) {
            ++p;
        } else if (*q < *p) {
            ++q;
        } else {
            return true;
        }
    }
    return false;
}

}  // namespace bipembed
