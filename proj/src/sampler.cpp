#include "bipembed/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "bipembed/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace bipembed {

std::string_view to_string(RecordKind k) noexcept {
    switch (k) {
        case RecordKind::AA: return "AA";
        case RecordKind::BB: return "BB";
        case RecordKind::AB: return "AB";
    }
    return "??";
}

void SampleSet::add_same(RecordKind kind, Vertex left, Vertex right, double target) {
    records_.push_back({kind, left, right, 0, target});
}

void SampleSet::add_cross(Vertex left, Vertex right, std::span<const Vertex> gamma_left,
                          std::span<const Vertex> gamma_right, double target) {
    if (gamma_left.size() != gamma_size_ || gamma_right.size() != gamma_size_) {
        throw MalformedRecordError("neighborhood samples must have size " +
                                   std::to_string(gamma_size_));
    }
    const auto block = static_cast<std::uint32_t>(gammas_.size() / (2 * std::max<std::size_t>(gamma_size_, 1)));
    gammas_.insert(gammas_.end(), gamma_left.begin(), gamma_left.end());
    gammas_.insert(gammas_.end(), gamma_right.begin(), gamma_right.end());
    records_.push_back({RecordKind::AB, left, right, block, target});
}

void SampleSet::append(const SampleSet& other) {
    if (other.gamma_size_ != gamma_size_) {
        throw ShapeError("cannot merge sample sets with different gamma sizes");
    }
    const auto shift = static_cast<std::uint32_t>(gammas_.size() / (2 * std::max<std::size_t>(gamma_size_, 1)));
    for (auto r : other.records_) {
        if (r.kind == RecordKind::AB) r.gamma_block += shift;
        records_.push_back(r);
    }
    gammas_.insert(gammas_.end(), other.gammas_.begin(), other.gammas_.end());
    skipped_nodes += other.skipped_nodes;
    skipped_negatives += other.skipped_negatives;
}

std::span<const Vertex> SampleSet::gamma_left(const SampleRecord& r) const {
    if (r.kind != RecordKind::AB) return {};
    return {gammas_.data() + 2 * gamma_size_ * r.gamma_block, gamma_size_};
}

std::span<const Vertex> SampleSet::gamma_right(const SampleRecord& r) const {
    if (r.kind != RecordKind::AB) return {};
    return {gammas_.data() + 2 * gamma_size_ * r.gamma_block + gamma_size_, gamma_size_};
}

int fobe_observe_same(const BipartiteGraph& g, Vertex i, Vertex j) {
    if (g.part_of(i) != g.part_of(j)) {
        throw TypeError("first-order observation needs two nodes of the same part");
    }
    return neighborhoods_intersect(g, i, j) ? 1 : 0;
}

int fobe_observe_same(const BipartiteGraph& g, NodeId i, NodeId j) {
    return fobe_observe_same(g, g.vertex(i), g.vertex(j));
}

double hobe_observe_same(const BipartiteGraph& g, const EdgeSimilarities& sims, Vertex i,
                         Vertex j) {
    if (g.part_of(i) != g.part_of(j)) {
        throw TypeError("first-order observation needs two nodes of the same part");
    }
    const auto x = g.neighbors(i);
    const auto y = g.neighbors(j);
    const auto sx = sims.of(i);
    const auto sy = sims.of(j);
    double best = 0.0;
    std::size_t p = 0;
    std::size_t q = 0;
    while (p < x.size() && q < y.size()) {
        if (x[p] < y[q]) {
            ++p;
        } else if (y[q] < x[p]) {
            ++q;
        } else {
            best = std::max(best, std::min(sx[p], sy[q]));
            ++p;
            ++q;
        }
    }
    return best;
}

CrossObserver::CrossObserver(const BipartiteGraph& g, const EdgeSimilarities& sims)
    : g_(&g), sims_(&sims), mark_(g.vertex_count(), -1.0) {}

double CrossObserver::operator()(Vertex alpha, Vertex beta) {
    const auto& g = *g_;
    if (g.part_of(alpha) == g.part_of(beta)) {
        throw TypeError("cross-part observation needs nodes of different parts");
    }
    if (g.part_of(alpha) == Part::B) std::swap(alpha, beta);

    // Every 3-path alpha - x - y - beta with edge similarities s1, s2, s3
    // contributes min(s1, s2) through the A-side term and min(s2, s3)
    // through the B-side term, i.e. min(s2, max(s1, s3)).
    const auto nb_beta = g.neighbors(beta);
    const auto s_beta = sims_->of(beta);
    for (std::size_t k = 0; k < nb_beta.size(); ++k) mark_[nb_beta[k]] = s_beta[k];

    double best = 0.0;
    const auto nb_alpha = g.neighbors(alpha);
    const auto s_alpha = sims_->of(alpha);
    for (std::size_t p = 0; p < nb_alpha.size() && best < 1.0; ++p) {
        const Vertex x = nb_alpha[p];
        const double s1 = s_alpha[p];
        const auto nb_x = g.neighbors(x);
        const auto s_x = sims_->of(x);
        for (std::size_t q = 0; q < nb_x.size(); ++q) {
            const double s2 = s_x[q];
            if (s2 <= best) continue;
            const double m = mark_[nb_x[q]];
            if (m < 0.0) continue;
            best = std::max(best, std::min(s2, std::max(s1, m)));
        }
    }

    for (const Vertex y : nb_beta) mark_[y] = -1.0;
    return best;
}

double hobe_observe_cross(const BipartiteGraph& g, const EdgeSimilarities& sims, Vertex i,
                          Vertex j) {
    CrossObserver observe(g, sims);
    return observe(i, j);
}

namespace {

std::size_t negatives_per_positive(double ratio) {
    return static_cast<std::size_t>(std::ceil(ratio));
}

void check_params(const SamplerParams& p) {
    if (p.samples_per_node < 1) throw ParameterError("samples per node s_r must be >= 1");
    if (p.gamma_size < 1) throw ParameterError("neighborhood sample size s_gamma must be >= 1");
    if (!(p.negative_ratio >= 0.0) || !std::isfinite(p.negative_ratio)) {
        throw ParameterError("negative ratio nu must be >= 0");
    }
}

RecordKind same_kind(const BipartiteGraph& g, Vertex v) {
    return g.part_of(v) == Part::A ? RecordKind::AA : RecordKind::BB;
}

Vertex uniform_in_part(const BipartiteGraph& g, Part p, Rng& rng) {
    return static_cast<Vertex>(g.part_begin(p) + rng.below(g.count(p)));
}

/// Per-node record generator shared by both samplers; Observe supplies the
/// targets and the cross-part hop count.
template <class Observe>
class NodeSampler {
public:
    NodeSampler(const BipartiteGraph& g, const SamplerParams& p, Observe& observe, int cross_hops)
        : g_(g), p_(p), observe_(observe), cross_hops_(cross_hops),
          gl_(p.gamma_size), gr_(p.gamma_size) {}

    void run(Vertex v, SampleSet& out) {
        if (g_.degree(v) == 0) {
            ++out.skipped_nodes;
            return;
        }
        Rng rng(derive_seed(p_.seed, v));
        const std::size_t negatives = negatives_per_positive(p_.negative_ratio);
        for (std::size_t round = 0; round < p_.samples_per_node; ++round) {
            const Vertex u = sample_khop(g_, v, 2, rng, p_.khop);
            out.add_same(same_kind(g_, v), v, u, observe_.same(v, u));
            for (std::size_t n = 0; n < negatives; ++n) same_negative(v, rng, out);

            const Vertex w = sample_khop(g_, v, cross_hops_, rng, p_.khop);
            emit_cross(v, w, observe_.cross(v, w), rng, out);
            for (std::size_t n = 0; n < negatives; ++n) cross_negative(v, rng, out);
        }
    }

private:
    void same_negative(Vertex v, Rng& rng, SampleSet& out) {
        for (int attempt = 0; attempt < kNegativeRetries; ++attempt) {
            const Vertex u = uniform_in_part(g_, g_.part_of(v), rng);
            if (!neighborhoods_intersect(g_, v, u)) {
                out.add_same(same_kind(g_, v), v, u, 0.0);
                return;
            }
        }
        ++out.skipped_negatives;
    }

    void cross_negative(Vertex v, Rng& rng, SampleSet& out) {
        const Part opposite = other(g_.part_of(v));
        for (int attempt = 0; attempt < kNegativeRetries; ++attempt) {
            const Vertex w = uniform_in_part(g_, opposite, rng);
            const auto nb = g_.neighbors(v);
            if (g_.degree(w) == 0 || std::binary_search(nb.begin(), nb.end(), w)) continue;
            emit_cross(v, w, 0.0, rng, out);
            return;
        }
        ++out.skipped_negatives;
    }

    void emit_cross(Vertex v, Vertex w, double target, Rng& rng, SampleSet& out) {
        const Vertex alpha = g_.part_of(v) == Part::A ? v : w;
        const Vertex beta = g_.part_of(v) == Part::A ? w : v;
        const auto from_beta = g_.neighbors(beta);
        const auto from_alpha = g_.neighbors(alpha);
        for (auto& x : gl_) x = from_beta[rng.below(from_beta.size())];
        for (auto& x : gr_) x = from_alpha[rng.below(from_alpha.size())];
        out.add_cross(alpha, beta, gl_, gr_, target);
    }

    const BipartiteGraph& g_;
    const SamplerParams& p_;
    Observe& observe_;
    int cross_hops_;
    std::vector<Vertex> gl_;
    std::vector<Vertex> gr_;
};

struct FobeObserve {
    double same(Vertex, Vertex) const { return 1.0; }
    double cross(Vertex, Vertex) const { return 1.0; }
};

struct HobeObserve {
    const BipartiteGraph& g;
    const EdgeSimilarities& sims;
    CrossObserver cross_observer;

    double same(Vertex v, Vertex u) const { return hobe_observe_same(g, sims, v, u); }
    double cross(Vertex v, Vertex w) { return cross_observer(v, w); }
};

template <class MakeObserve>
SampleSet sample_all(const BipartiteGraph& g, const SamplerParams& params, int cross_hops,
                     MakeObserve make_observe) {
    check_params(params);
    const std::size_t n = g.vertex_count();
    const unsigned workers = std::max(1u, params.threads);
    std::vector<SampleSet> parts(workers, SampleSet(params.gamma_size));
    detail::parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
        auto observe = make_observe();
        NodeSampler sampler(g, params, observe, cross_hops);
        for (std::size_t v = begin; v < end; ++v) {
            sampler.run(static_cast<Vertex>(v), parts[w]);
        }
    });
    SampleSet out(params.gamma_size);
    for (const auto& part : parts) out.append(part);
    return out;
}

}  // namespace

SampleSet fobe_sample(const BipartiteGraph& g, const SamplerParams& params) {
    return sample_all(g, params, 1, [] { return FobeObserve{}; });
}

SampleSet hobe_sample(const BipartiteGraph& g, const EdgeSimilarities& sims,
                      const SamplerParams& params) {
    if (sims.edge_count() != g.edge_count()) {
        throw ShapeError("edge similarities were computed on a different graph");
    }
    return sample_all(g, params, 3, [&] { return HobeObserve{g, sims, CrossObserver(g, sims)}; });
}

void write_samples(std::ostream& out, const BipartiteGraph& g, const SampleSet& samples) {
    auto write_list = [&](std::span<const Vertex> list) {
        for (std::size_t k = 0; k < list.size(); ++k) {
            if (k > 0) out << ',';
            out << g.name(list[k]);
        }
    };
    for (const auto& r : samples.records()) {
        out << to_string(r.kind) << '\t' << g.name(r.left) << '\t' << g.name(r.right) << '\t'
            << detail::format_double(r.target) << '\t';
        write_list(samples.gamma_left(r));
        out << '\t';
        write_list(samples.gamma_right(r));
        out << '\n';
    }
}

SampleSet read_samples(std::istream& in, const BipartiteGraph& g) {
    struct Parsed {
        RecordKind kind;
        Vertex left;
        Vertex right;
        double target;
        std::vector<Vertex> gl;
        std::vector<Vertex> gr;
    };
    std::vector<Parsed> rows;
    std::size_t gamma_size = 0;
    bool gamma_known = false;
    std::string line;
    std::size_t line_no = 0;
    auto lookup = [&](std::string_view id) {
        const auto v = g.find(id);
        if (!v) throw LookupError("sample names unknown node '" + std::string(id) + "'");
        return *v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim_cr(line);
        if (text.empty()) continue;
        const auto f = detail::split(text, '\t');
        if (f.size() != 6) throw ParseError(line_no, "expected 6 tab-separated fields");
        Parsed p{};
        if (f[0] == "AA") p.kind = RecordKind::AA;
        else if (f[0] == "BB") p.kind = RecordKind::BB;
        else if (f[0] == "AB") p.kind = RecordKind::AB;
        else throw ParseError(line_no, "unknown record kind '" + std::string(f[0]) + "'");
        p.left = lookup(f[1]);
        p.right = lookup(f[2]);
        const auto t = detail::parse_double(f[3]);
        if (!t) throw ParseError(line_no, "invalid target");
        p.target = *t;
        if (p.kind == RecordKind::AB) {
            for (const auto id : detail::split(f[4], ',')) p.gl.push_back(lookup(id));
            for (const auto id : detail::split(f[5], ',')) p.gr.push_back(lookup(id));
            if (p.gl.size() != p.gr.size() || (gamma_known && p.gl.size() != gamma_size)) {
                throw ParseError(line_no, "inconsistent neighborhood sample size");
            }
            gamma_size = p.gl.size();
            gamma_known = true;
        } else if (!f[4].empty() || !f[5].empty()) {
            throw ParseError(line_no, "same-part records carry no neighborhood samples");
        }
        rows.push_back(std::move(p));
    }
    SampleSet out(gamma_size);
    for (const auto& p : rows) {
        if (p.kind == RecordKind::AB) out.add_cross(p.left, p.right, p.gl, p.gr, p.target);
        else out.add_same(p.kind, p.left, p.right, p.target);
    }
    return out;
}

}  // namespace bipembed
