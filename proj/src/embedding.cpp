#include "bipembed/embedding.hpp"

#include <istream>
#include <ostream>

#include "bipembed/error.hpp"
#include "text_util.hpp"

namespace bipembed {

EmbeddingTable::EmbeddingTable(std::vector<std::string> ids, std::size_t dimension)
    : dimension_(dimension), ids_(std::move(ids)), values_(ids_.size() * dimension, 0.0) {
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) {
            throw ParameterError("duplicate embedding id '" + ids_[i] + "'");
        }
    }
}

EmbeddingTable EmbeddingTable::for_graph(const BipartiteGraph& g, std::size_t dimension) {
    std::vector<std::string> ids;
    ids.reserve(g.vertex_count());
    for (Vertex v = 0; v < g.vertex_count(); ++v) ids.push_back(g.name(v));
    return EmbeddingTable(std::move(ids), dimension);
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> EmbeddingTable::row_of(const BipartiteGraph& g, Vertex v) const {
    if (v < ids_.size() && ids_[v] == g.name(v)) return v;
    return find(g.name(v));
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << table.size() << ' ' << table.dimension() << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.id(i);
        for (const double x : table.row(i)) out << ' ' << detail::format_double(x);
        out << '\n';
    }
}

EmbeddingTable read_embeddings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "empty embedding file");
    const auto header = detail::split_ws(detail::trim_cr(line));
    if (header.size() != 2) throw ParseError(1, "header must be `<node_count> <r>`");
    const auto n = detail::parse_uint(header[0]);
    const auto r = detail::parse_uint(header[1]);
    if (!n || !r) throw ParseError(1, "header must be `<node_count> <r>`");

    std::vector<std::string> ids;
    std::vector<double> values;
    ids.reserve(*n);
    values.reserve(*n * *r);
    std::size_t line_no = 1;
    while (ids.size() < *n && std::getline(in, line)) {
        ++line_no;
        const auto f = detail::split_ws(detail::trim_cr(line));
        if (f.empty()) continue;
        if (f.size() != *r + 1) {
            throw ParseError(line_no, "expected an id and " + std::to_string(*r) + " values");
        }
        ids.emplace_back(f[0]);
        for (std::size_t k = 1; k < f.size(); ++k) {
            const auto x = detail::parse_double(f[k]);
            if (!x) throw ParseError(line_no, "invalid embedding value");
            values.push_back(*x);
        }
    }
    if (ids.size() != *n) throw ParseError(line_no, "embedding file ended early");
    EmbeddingTable table(std::move(ids), *r);
    table.values() = std::move(values);
    return table;
}

double dot(std::span<const double> x, std::span<const double> y) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
    return s;
}

}  // namespace bipembed
