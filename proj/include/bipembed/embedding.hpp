#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bipembed/graph.hpp"

namespace bipembed {

/// Node id -> r-dimensional vector. Tables built for a graph store row v for
/// vertex v, so graph vertices index rows directly.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::vector<std::string> ids, std::size_t dimension);

    static EmbeddingTable for_graph(const BipartiteGraph& g, std::size_t dimension);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * dimension_, dimension_}; }
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * dimension_, dimension_};
    }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    std::optional<std::size_t> find(std::string_view id) const;
    /// Row of a graph vertex, matched by id when the table was built elsewhere.
    std::optional<std::size_t> row_of(const BipartiteGraph& g, Vertex v) const;

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t dimension_ = 0;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> values_;
};

/// First line `<node_count> <r>`, then `<id> <v_1> ... <v_r>` per node.
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& in);

double dot(std::span<const double> x, std::span<const double> y) noexcept;

}  // namespace bipembed
