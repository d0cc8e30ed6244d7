#include "bipembed/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_set>

#include "bipembed/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace bipembed {

std::string_view to_string(CombineMode m) noexcept {
    return m == CombineMode::Direct ? "direct" : "autoreg";
}

CombinerModel::CombinerModel(CombineMode mode, std::size_t input_dim, std::size_t combined_dim,
                             double dropout, std::uint64_t seed)
    : mode_(mode),
      input_dim_(input_dim),
      combined_dim_(combined_dim),
      hidden_dim_((input_dim + combined_dim + 1) / 2),
      dropout_(dropout) {
    if (input_dim == 0 || combined_dim == 0)
        throw ParameterError("combiner dimensions must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("dropout must lie in [0, 1)");
    using nn::Activation;
    for (auto& p : parts_) {
        p.encode_hidden = nn::add_layer(params_, input_dim_, hidden_dim_, Activation::Relu);
        p.encode_out = nn::add_layer(params_, hidden_dim_, combined_dim_, Activation::Tanh);
        if (mode_ == CombineMode::AutoRegularized) {
            p.decode_hidden = nn::add_layer(params_, combined_dim_, hidden_dim_, Activation::Relu);
            p.decode_out = nn::add_layer(params_, hidden_dim_, input_dim_, Activation::Identity);
        }
    }
    head_hidden_ = nn::add_layer(params_, 2 * combined_dim_, combined_dim_, Activation::Relu);
    head_out_ = nn::add_layer(params_, combined_dim_, 1, Activation::Sigmoid);
    Rng rng(seed);
    for (const auto& layer : layers()) nn::glorot_init(layer, params_, rng);
}

std::vector<nn::DenseLayer> CombinerModel::layers() const {
    std::vector<nn::DenseLayer> out;
    for (const auto& p : parts_) {
        out.push_back(p.encode_hidden);
        out.push_back(p.encode_out);
        if (mode_ == CombineMode::AutoRegularized) {
            out.push_back(p.decode_hidden);
            out.push_back(p.decode_out);
        }
    }
    out.push_back(head_hidden_);
    out.push_back(head_out_);
    return out;
}

std::vector<double> concat_input(std::span<const EmbeddingTable> tables, const BipartiteGraph& g,
                                 NodeId v) {
    const Vertex x = g.vertex(v);
    std::vector<double> out;
    for (const auto& t : tables) {
        const auto row = t.row_of(g, x);
        if (!row) throw LookupError("node '" + g.name(x) + "' missing from embedding table");
        const auto values = t.row(*row);
        out.insert(out.end(), values.begin(), values.end());
    }
    return out;
}

CombinerTrainingSet build_combiner_training_set(const BipartiteGraph& g, std::uint64_t seed,
                                                std::size_t negatives_per_node) {
    if (g.empty()) throw EmptyGraphError("combiner training needs a nonempty graph");
    CombinerTrainingSet set;
    for (const auto& e : g.edges()) set.pairs.push_back({e.a, e.b, 1.0});

    std::vector<Vertex> pool;
    std::unordered_set<Vertex> chosen;
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const Part p = g.part_of(v);
        const Part q = other(p);
        const auto nbrs = g.neighbors(v);
        const std::size_t available = g.count(q) - nbrs.size();
        const std::size_t want = std::min(negatives_per_node, available);
        set.shortfall += negatives_per_node - want;
        if (want == 0) continue;
        Rng rng(derive_seed(seed, v));
        std::vector<Vertex> picks;
        if (available <= 4 * want) {
            pool.clear();
            std::size_t k = 0;
            for (Vertex u = g.part_begin(q); u < g.part_end(q); ++u) {
                while (k < nbrs.size() && nbrs[k] < u) ++k;
                if (k < nbrs.size() && nbrs[k] == u) continue;
                pool.push_back(u);
            }
            for (std::size_t i = 0; i < want; ++i) {
                const std::size_t j = i + rng.below(pool.size() - i);
                std::swap(pool[i], pool[j]);
            }
            picks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
        } else {
            chosen.clear();
            while (picks.size() < want) {
                const Vertex u = g.part_begin(q) + static_cast<Vertex>(rng.below(g.count(q)));
                if (std::binary_search(nbrs.begin(), nbrs.end(), u)) continue;
                if (chosen.insert(u).second) picks.push_back(u);
            }
        }
        for (const Vertex u : picks) {
            const Vertex a = p == Part::A ? v : u;
            const Vertex b = p == Part::A ? u : v;
            set.pairs.push_back({g.node(a).index, g.node(b).index, 0.0});
        }
    }
    return set;
}

namespace {

void run_layer(const nn::DenseLayer& layer, std::span<const double> params,
               std::span<const double> x, std::vector<double>& pre, std::vector<double>& y) {
    pre.assign(layer.out, 0.0);
    y.assign(layer.out, 0.0);
    nn::forward(layer, params, x, pre, y);
}

void check_shape(const CombinerModel& m, std::span<const double> input) {
    if (input.size() != m.input_dim())
        throw ShapeError("combiner input has dimension " + std::to_string(input.size()) +
                         ", expected " + std::to_string(m.input_dim()));
}

double l2_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

}  // namespace

CombinerForward combiner_forward(const CombinerModel& m, std::span<const double> in_a,
                                 std::span<const double> in_b, bool training, Rng& rng) {
    check_shape(m, in_a);
    check_shape(m, in_b);
    CombinerForward f;
    const auto& params = m.params();
    const double keep = 1.0 - m.dropout();
    for (int k = 0; k < 2; ++k) {
        const Part p = k == 0 ? Part::A : Part::B;
        const auto input = k == 0 ? in_a : in_b;
        auto& s = f.part[k];
        s.input.assign(input.begin(), input.end());
        if (training && m.dropout() > 0.0) {
            for (double& x : s.input) x = rng.bernoulli(keep) ? x / keep : 0.0;
        }
        const auto& layers = m.part(p);
        run_layer(layers.encode_hidden, params, s.input, s.hidden_pre, s.hidden);
        run_layer(layers.encode_out, params, s.hidden, s.combined_pre, s.combined);
        if (m.mode() == CombineMode::AutoRegularized) {
            run_layer(layers.decode_hidden, params, s.combined, s.decode_pre, s.decode_hidden);
            run_layer(layers.decode_out, params, s.decode_hidden, s.out_pre, s.out);
        }
    }
    f.head_in = f.part[0].combined;
    f.head_in.insert(f.head_in.end(), f.part[1].combined.begin(), f.part[1].combined.end());
    run_layer(m.head_hidden(), params, f.head_in, f.head_pre, f.head_hidden);
    std::vector<double> pre, y;
    run_layer(m.head_out(), params, f.head_hidden, pre, y);
    f.score_pre = pre[0];
    f.score = y[0];
    return f;
}

std::vector<double> combiner_project(const CombinerModel& m, Part part,
                                     std::span<const double> input) {
    check_shape(m, input);
    const auto& layers = m.part(part);
    std::vector<double> pre, hidden, out;
    run_layer(layers.encode_hidden, m.params(), input, pre, hidden);
    run_layer(layers.encode_out, m.params(), hidden, pre, out);
    return out;
}

CombinerLoss combiner_sample_loss(const CombinerModel& m, double target,
                                  std::span<const double> in_a, std::span<const double> in_b,
                                  const CombinerForward& f) {
    CombinerLoss loss;
    const double err = target - f.score;
    loss.link = err * err;
    if (m.mode() == CombineMode::Direct) {
        loss.total = loss.link;
        return loss;
    }
    loss.reconstruction = l2_distance(in_a, f.part[0].out) + l2_distance(in_b, f.part[1].out);
    loss.total = 4.0 * loss.link + loss.reconstruction;
    return loss;
}

CombinerLoss combiner_loss(const CombinerModel& m, std::span<const CombinerExample> batch) {
    CombinerLoss mean;
    if (batch.empty()) return mean;
    for (const auto& ex : batch) {
        const auto l = combiner_sample_loss(m, ex.target, ex.in_a, ex.in_b, ex.forward);
        mean.link += l.link;
        mean.reconstruction += l.reconstruction;
        mean.total += l.total;
    }
    const double n = static_cast<double>(batch.size());
    mean.link /= n;
    mean.reconstruction /= n;
    mean.total /= n;
    return mean;
}

void combiner_backward(const CombinerModel& m, double target, std::span<const double> in_a,
                       std::span<const double> in_b, const CombinerForward& f, double scale,
                       std::span<double> grad) {
    const auto& params = m.params();
    const double link_weight = m.mode() == CombineMode::Direct ? 1.0 : 4.0;
    const double d_score = scale * link_weight * 2.0 * (f.score - target);

    const std::size_t k = m.combined_dim();
    std::vector<double> d_head_hidden(k, 0.0);
    {
        const double dy[1] = {d_score};
        const double pre[1] = {f.score_pre};
        const double y[1] = {f.score};
        nn::backward(m.head_out(), params, f.head_hidden, pre, y, dy, d_head_hidden, grad);
    }
    std::vector<double> d_head_in(2 * k, 0.0);
    nn::backward(m.head_hidden(), params, f.head_in, f.head_pre, f.head_hidden, d_head_hidden,
                 d_head_in, grad);

    for (int side = 0; side < 2; ++side) {
        const Part p = side == 0 ? Part::A : Part::B;
        const auto& layers = m.part(p);
        const auto& s = f.part[side];
        std::vector<double> d_combined(d_head_in.begin() + static_cast<std::ptrdiff_t>(side * k),
                                       d_head_in.begin() + static_cast<std::ptrdiff_t>((side + 1) * k));
        if (m.mode() == CombineMode::AutoRegularized) {
            const auto clean = side == 0 ? in_a : in_b;
            const double norm = l2_distance(clean, s.out);
            std::vector<double> d_out(m.input_dim(), 0.0);
            if (norm > 0.0) {
                for (std::size_t i = 0; i < d_out.size(); ++i)
                    d_out[i] = scale * (s.out[i] - clean[i]) / norm;
            }
            std::vector<double> d_decode(m.hidden_dim(), 0.0);
            nn::backward(layers.decode_out, params, s.decode_hidden, s.out_pre, s.out, d_out,
                         d_decode, grad);
            nn::backward(layers.decode_hidden, params, s.combined, s.decode_pre, s.decode_hidden,
                         d_decode, d_combined, grad);
        }
        std::vector<double> d_hidden(m.hidden_dim(), 0.0);
        nn::backward(layers.encode_out, params, s.hidden, s.combined_pre, s.combined, d_combined,
                     d_hidden, grad);
        nn::backward(layers.encode_hidden, params, s.input, s.hidden_pre, s.hidden, d_hidden, {},
                     grad);
    }
}

namespace {

struct InputMatrix {
    std::size_t dim = 0;
    std::vector<double> values;
    std::span<const double> row(Vertex v) const { return {values.data() + v * dim, dim}; }
};

InputMatrix gather_inputs(std::span<const EmbeddingTable> tables, const BipartiteGraph& g) {
    InputMatrix m;
    for (const auto& t : tables) m.dim += t.dimension();
    m.values.reserve(m.dim * g.vertex_count());
    for (Vertex v = 0; v < g.vertex_count(); ++v) {
        const auto row = concat_input(tables, g, g.node(v));
        m.values.insert(m.values.end(), row.begin(), row.end());
    }
    return m;
}

CombinerLoss evaluate(const CombinerModel& m, const BipartiteGraph& g, const InputMatrix& inputs,
                      std::span<const CombinerPair> pairs) {
    CombinerLoss mean;
    Rng unused(0);
    for (const auto& pr : pairs) {
        const auto in_a = inputs.row(g.vertex_a(pr.a));
        const auto in_b = inputs.row(g.vertex_b(pr.b));
        const auto f = combiner_forward(m, in_a, in_b, false, unused);
        const auto l = combiner_sample_loss(m, pr.target, in_a, in_b, f);
        mean.link += l.link;
        mean.reconstruction += l.reconstruction;
        mean.total += l.total;
    }
    if (!pairs.empty()) {
        const double n = static_cast<double>(pairs.size());
        mean.link /= n;
        mean.reconstruction /= n;
        mean.total /= n;
    }
    return mean;
}

}  // namespace

CombinerResult train_combiner(std::span<const EmbeddingTable> tables, const BipartiteGraph& g,
                              const CombinerConfig& config) {
    if (config.combined_dim == 0) throw ParameterError("combined dimension must be at least 1");
    if (tables.empty()) throw ParameterError("combiner needs at least one embedding table");
    if (config.batch_size == 0) throw ParameterError("batch size must be positive");
    if (!(config.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (g.empty()) throw EmptyGraphError("combiner training needs a nonempty graph");

    const InputMatrix inputs = gather_inputs(tables, g);
    CombinerResult result;
    result.model = CombinerModel(config.mode, inputs.dim, config.combined_dim, config.dropout,
                                 derive_seed(config.seed, 0));
    auto& model = result.model;
    auto training = build_combiner_training_set(g, derive_seed(config.seed, 1),
                                                config.negatives_per_node);
    result.negative_shortfall = training.shortfall;
    auto& pairs = training.pairs;

    Rng shuffle_rng(derive_seed(config.seed, 2));
    Rng dropout_rng(derive_seed(config.seed, 3));
    nn::Adagrad optimizer(model.params().size(), config.learning_rate, config.adagrad_eps);
    std::vector<double> grad(model.params().size(), 0.0);

    result.trace.push_back(evaluate(model, g, inputs, pairs));
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(pairs.begin(), pairs.end());
        for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
            const std::size_t end = std::min(pairs.size(), start + config.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto in_a = inputs.row(g.vertex_a(pairs[i].a));
                const auto in_b = inputs.row(g.vertex_b(pairs[i].b));
                const auto f = combiner_forward(model, in_a, in_b, true, dropout_rng);
                batch_loss += combiner_sample_loss(model, pairs[i].target, in_a, in_b, f).total;
                combiner_backward(model, pairs[i].target, in_a, in_b, f, scale, grad);
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceError(epoch, "combiner loss is not finite");
            optimizer.step(model.params(), grad);
        }
        const auto l = evaluate(model, g, inputs, pairs);
        if (!std::isfinite(l.total)) throw DivergenceError(epoch, "combiner loss is not finite");
        result.trace.push_back(l);
    }

    result.combined = EmbeddingTable::for_graph(g, config.combined_dim);
    detail::parallel_chunks(g.vertex_count(), config.threads,
                            [&](std::size_t begin, std::size_t end, unsigned) {
                                for (std::size_t v = begin; v < end; ++v) {
                                    const auto x = static_cast<Vertex>(v);
                                    const auto y = combiner_project(model, g.part_of(x), inputs.row(x));
                                    std::copy(y.begin(), y.end(), result.combined.row(v).begin());
                                }
                            });
    return result;
}

void write_combiner(std::ostream& out, const CombinerModel& m) {
    out << "# combiner\n";
    out << "mode " << to_string(m.mode()) << '\n';
    out << "input_dim " << m.input_dim() << '\n';
    out << "combined_dim " << m.combined_dim() << '\n';
    out << "hidden_dim " << m.hidden_dim() << '\n';
    out << "dropout " << detail::format_double(m.dropout()) << '\n';
    const auto layers = m.layers();
    out << "[layers] " << layers.size() << '\n';
    for (const auto& l : layers)
        out << l.in << ' ' << l.out << ' ' << nn::to_string(l.activation) << '\n';
    out << "[params] " << m.params().size() << '\n';
    for (const auto& l : layers) {
        for (std::size_t i = 0; i < l.param_count(); ++i) {
            out << (i == 0 ? "" : " ") << detail::format_double(m.params()[l.offset + i]);
        }
        out << '\n';
    }
}

CombinerModel read_combiner(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&](std::string_view what) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line[0] == '#') continue;
            return detail::split_ws(detail::trim_cr(line));
        }
        throw ParseError(line_no, "unexpected end of combiner checkpoint, expected " +
                                      std::string(what));
    };
    auto keyed = [&](std::string_view key) {
        const auto fields = next(key);
        if (fields.size() != 2 || fields[0] != key)
            throw ParseError(line_no, "expected '" + std::string(key) + " <value>'");
        return std::string(fields[1]);
    };
    auto to_size = [&](const std::string& s) {
        const auto v = detail::parse_uint(s);
        if (!v) throw ParseError(line_no, "invalid integer '" + s + "'");
        return static_cast<std::size_t>(*v);
    };

    const std::string mode_s = keyed("mode");
    CombineMode mode;
    if (mode_s == "direct") mode = CombineMode::Direct;
    else if (mode_s == "autoreg") mode = CombineMode::AutoRegularized;
    else throw ParseError(line_no, "unknown combiner mode '" + mode_s + "'");
    const std::size_t input_dim = to_size(keyed("input_dim"));
    const std::size_t combined_dim = to_size(keyed("combined_dim"));
    const std::size_t hidden_dim = to_size(keyed("hidden_dim"));
    const std::string dropout_s = keyed("dropout");
    const auto dropout = detail::parse_double(dropout_s);
    if (!dropout) throw ParseError(line_no, "invalid dropout '" + dropout_s + "'");

    CombinerModel m(mode, input_dim, combined_dim, *dropout, 0);
    if (m.hidden_dim() != hidden_dim) throw ParseError(line_no, "hidden dimension mismatch");
    const auto layers = m.layers();
    const std::string layer_count = keyed("[layers]");
    if (to_size(layer_count) != layers.size()) throw ParseError(line_no, "layer count mismatch");
    for (const auto& l : layers) {
        const auto f = next("layer");
        if (f.size() != 3 || to_size(std::string(f[0])) != l.in ||
            to_size(std::string(f[1])) != l.out || f[2] != nn::to_string(l.activation))
            throw ParseError(line_no, "layer shape mismatch");
    }
    if (to_size(keyed("[params]")) != m.params().size())
        throw ParseError(line_no, "parameter count mismatch");
    for (const auto& l : layers) {
        const auto f = next("parameters");
        if (f.size() != l.param_count()) throw ParseError(line_no, "parameter row length mismatch");
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto v = detail::parse_double(f[i]);
            if (!v || !std::isfinite(*v)) throw ParseError(line_no, "invalid parameter value");
            m.params()[l.offset + i] = *v;
        }
    }
    return m;
}

}  // namespace bipembed
