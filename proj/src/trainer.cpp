#include "bipembed/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bipembed/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace bipembed {

void validate(const TrainConfig& c) {
    if (c.dimension < 1) throw ParameterError("embedding dimension must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (!(c.adagrad_eps > 0.0)) throw ParameterError("adagrad epsilon must be positive");
    if (!(c.prob_floor > 0.0 && c.prob_floor < 0.5)) {
        throw ParameterError("probability floor must lie in (0, 0.5)");
    }
    if (c.batch_size < 1) throw ParameterError("batch size must be >= 1");
}

EmbeddingTable init_embeddings(const BipartiteGraph& g, std::size_t dimension, std::uint64_t seed) {
    if (dimension < 1) throw ParameterError("embedding dimension must be >= 1");
    auto table = EmbeddingTable::for_graph(g, dimension);
    Rng rng(seed);
    const double half = 0.5 / static_cast<double>(dimension);
    for (auto& x : table.values()) x = rng.uniform(-half, half);
    return table;
}

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

struct Activation {
    bool relu;
    double value(double x) const noexcept {
        if (relu) return x > 0.0 || std::isnan(x) ? x : 0.0;
        return sigmoid(x);
    }
    double slope(double x, double value) const noexcept {
        if (relu) return x > 0.0 ? 1.0 : 0.0;
        return value * (1.0 - value);
    }
};

Activation activation_for(LossKind kind) { return {kind == LossKind::HobeMse}; }

/// Loss of one record and its derivative with respect to the estimate.
struct PointLoss {
    double value;
    double slope;
};

PointLoss point_loss(LossKind kind, double target, double estimate, double floor) {
    if (kind == LossKind::HobeMse) {
        const double d = estimate - target;
        return {d * d, 2.0 * d};
    }
    const double t = std::clamp(target, floor, 1.0 - floor);
    const double p = std::clamp(estimate, floor, 1.0 - floor);
    const bool inside = estimate > floor && estimate < 1.0 - floor;
    if (kind == LossKind::FobeKlPrinted) {
        return {p * std::log(t / p), inside ? std::log(t / p) - 1.0 : 0.0};
    }
    const double value = t * std::log(t / p) + (1.0 - t) * std::log((1.0 - t) / (1.0 - p));
    return {value, inside ? -t / p + (1.0 - t) / (1.0 - p) : 0.0};
}

/// Row pointers for every embedding a record reads.
struct RecordRows {
    const double* left = nullptr;
    const double* right = nullptr;
    std::vector<const double*> gl;
    std::vector<const double*> gr;
};

/// Direct reads from the table (single-writer mode).
struct DirectRows {
    const EmbeddingTable& table;
    const double* get(Vertex v) { return table.row(v).data(); }
    void reset() {}
};

/// Relaxed atomic snapshots for lock-free multi-writer training.
struct SnapshotRows {
    EmbeddingTable& table;
    std::vector<double> buffer;
    std::size_t used = 0;

    SnapshotRows(EmbeddingTable& t, std::size_t max_rows)
        : table(t), buffer(max_rows * t.dimension()) {}
    const double* get(Vertex v) {
        double* out = buffer.data() + used;
        auto src = table.row(v);
        for (std::size_t k = 0; k < src.size(); ++k) {
            out[k] = std::atomic_ref<double>(src[k]).load(std::memory_order_relaxed);
        }
        used += src.size();
        return out;
    }
    void reset() { used = 0; }
};

template <class Rows>
void gather(const SampleSet& samples, const SampleRecord& r, Rows& rows, RecordRows& out) {
    rows.reset();
    out.left = rows.get(r.left);
    out.right = rows.get(r.right);
    out.gl.clear();
    out.gr.clear();
    if (r.kind == RecordKind::AB) {
        if (samples.gamma_size() == 0) {
            throw MalformedRecordError("cross-part record without neighborhood samples");
        }
        for (const Vertex v : samples.gamma_left(r)) out.gl.push_back(rows.get(v));
        for (const Vertex v : samples.gamma_right(r)) out.gr.push_back(rows.get(v));
    }
}

double dot_raw(const double* x, const double* y, std::size_t n) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
    return s;
}

/// Forward pass of one record; with `grad`, also backpropagates
/// scale * dLoss/dEstimate through the estimator.
double evaluate(const SampleSet& samples, const SampleRecord& r, const RecordRows& rows,
                std::size_t dim, Activation act, double upstream, SparseGradient* grad) {
    if (r.kind != RecordKind::AB) {
        const double x = dot_raw(rows.left, rows.right, dim);
        const double p = act.value(x);
        if (grad != nullptr && upstream != 0.0) {
            const double coef = upstream * act.slope(x, p);
            grad->add(r.left, coef, rows.right);
            grad->add(r.right, coef, rows.left);
        }
        return p;
    }
    const std::size_t s = rows.gl.size();
    const double inv = 1.0 / static_cast<double>(s);
    double xs[64];
    double ys[64];
    std::vector<double> heap;
    double* xv = xs;
    double* yv = ys;
    if (s > 64) {
        heap.resize(2 * s);
        xv = heap.data();
        yv = heap.data() + s;
    }
    double left_mean = 0.0;
    double right_mean = 0.0;
    for (std::size_t k = 0; k < s; ++k) {
        xv[k] = dot_raw(rows.left, rows.gl[k], dim);
        left_mean += act.value(xv[k]);
        yv[k] = dot_raw(rows.right, rows.gr[k], dim);
        right_mean += act.value(yv[k]);
    }
    left_mean *= inv;
    right_mean *= inv;
    const double p = left_mean * right_mean;
    if (grad != nullptr && upstream != 0.0) {
        const auto gl = samples.gamma_left(r);
        const auto gr = samples.gamma_right(r);
        for (std::size_t k = 0; k < s; ++k) {
            const double cl = upstream * right_mean * inv * act.slope(xv[k], act.value(xv[k]));
            if (cl != 0.0) {
                grad->add(r.left, cl, rows.gl[k]);
                grad->add(gl[k], cl, rows.left);
            }
            const double cr = upstream * left_mean * inv * act.slope(yv[k], act.value(yv[k]));
            if (cr != 0.0) {
                grad->add(r.right, cr, rows.gr[k]);
                grad->add(gr[k], cr, rows.right);
            }
        }
    }
    return p;
}

double estimate(const EmbeddingTable& table, const SampleSet& samples, const SampleRecord& r,
                Activation act) {
    DirectRows direct{table};
    RecordRows rows;
    gather(samples, r, direct, rows);
    return evaluate(samples, r, rows, table.dimension(), act, 0.0, nullptr);
}

template <class Fn>
void for_batch(const SampleSet& samples, std::span<const std::size_t> batch, Fn&& fn) {
    if (batch.empty()) {
        for (const auto& r : samples.records()) fn(r);
    } else {
        for (const std::size_t i : batch) fn(samples[i]);
    }
}

template <class Rows>
double accumulate(Rows& source, std::size_t dim, const SampleSet& samples,
                  std::span<const std::size_t> batch, LossKind kind, double floor,
                  SparseGradient& grad) {
    const std::size_t n = batch.empty() ? samples.size() : batch.size();
    if (n == 0) return 0.0;
    const double scale = 1.0 / static_cast<double>(n);
    const Activation act = activation_for(kind);
    RecordRows rows;
    double total = 0.0;
    for_batch(samples, batch, [&](const SampleRecord& r) {
        gather(samples, r, source, rows);
        const double p = evaluate(samples, r, rows, dim, act, 0.0, nullptr);
        const PointLoss l = point_loss(kind, r.target, p, floor);
        total += l.value;
        evaluate(samples, r, rows, dim, act, scale * l.slope, &grad);
    });
    return total * scale;
}

}  // namespace

double fobe_estimate(const EmbeddingTable& table, const SampleSet& samples, const SampleRecord& r) {
    return estimate(table, samples, r, Activation{false});
}

double hobe_estimate(const EmbeddingTable& table, const SampleSet& samples, const SampleRecord& r) {
    return estimate(table, samples, r, Activation{true});
}

double batch_loss(const EmbeddingTable& table, const SampleSet& samples,
                  std::span<const std::size_t> batch, LossKind kind, double prob_floor) {
    const std::size_t n = batch.empty() ? samples.size() : batch.size();
    if (n == 0) throw ParameterError("loss of an empty batch is undefined");
    const Activation act = activation_for(kind);
    double total = 0.0;
    for_batch(samples, batch, [&](const SampleRecord& r) {
        total += point_loss(kind, r.target, estimate(table, samples, r, act), prob_floor).value;
    });
    return total / static_cast<double>(n);
}

double fobe_loss(const EmbeddingTable& table, const SampleSet& samples,
                 std::span<const std::size_t> batch, double prob_floor, bool printed) {
    return batch_loss(table, samples, batch, printed ? LossKind::FobeKlPrinted : LossKind::FobeKl,
                      prob_floor);
}

double hobe_loss(const EmbeddingTable& table, const SampleSet& samples,
                 std::span<const std::size_t> batch) {
    return batch_loss(table, samples, batch, LossKind::HobeMse, 0.0);
}

SparseGradient::SparseGradient(std::size_t rows, std::size_t dimension)
    : dimension_(dimension), values_(rows * dimension, 0.0), mark_(rows, 0) {}

void SparseGradient::add(Vertex v, double coef, const double* x) {
    if (!mark_[v]) {
        mark_[v] = 1;
        touched_.push_back(v);
    }
    double* out = values_.data() + v * dimension_;
    for (std::size_t k = 0; k < dimension_; ++k) out[k] += coef * x[k];
}

void SparseGradient::clear() {
    for (const Vertex v : touched_) {
        mark_[v] = 0;
        std::fill_n(values_.begin() + static_cast<std::ptrdiff_t>(v * dimension_), dimension_, 0.0);
    }
    touched_.clear();
}

double accumulate_gradient(const EmbeddingTable& table, const SampleSet& samples,
                           std::span<const std::size_t> batch, LossKind kind, double prob_floor,
                           SparseGradient& grad) {
    DirectRows direct{table};
    return accumulate(direct, table.dimension(), samples, batch, kind, prob_floor, grad);
}

namespace {

void adagrad_step(EmbeddingTable& table, AdagradState& state, SparseGradient& grad,
                  const TrainConfig& c, bool concurrent) {
    const std::size_t dim = table.dimension();
    for (const Vertex v : grad.touched()) {
        auto g = grad.row(v);
        auto x = table.row(v);
        double* acc = state.accumulated.data() + v * dim;
        for (std::size_t k = 0; k < dim; ++k) {
            if (concurrent) {
                std::atomic_ref<double> a(acc[k]);
                std::atomic_ref<double> w(x[k]);
                const double sum = a.load(std::memory_order_relaxed) + g[k] * g[k];
                a.store(sum, std::memory_order_relaxed);
                w.store(w.load(std::memory_order_relaxed) -
                            c.learning_rate * g[k] / std::sqrt(sum + c.adagrad_eps),
                        std::memory_order_relaxed);
            } else {
                acc[k] += g[k] * g[k];
                x[k] -= c.learning_rate * g[k] / std::sqrt(acc[k] + c.adagrad_eps);
            }
        }
    }
    grad.clear();
}

double full_loss(const EmbeddingTable& table, const SampleSet& samples, const TrainConfig& c) {
    return batch_loss(table, samples, {}, c.loss, c.prob_floor);
}

}  // namespace

TrainResult train(const SampleSet& samples, const BipartiteGraph& g, const TrainConfig& config) {
    return train(samples, g, config, init_embeddings(g, config.dimension, derive_seed(config.seed, 0)));
}

TrainResult train(const SampleSet& samples, const BipartiteGraph& g, const TrainConfig& config,
                  EmbeddingTable initial) {
    validate(config);
    if (initial.size() != g.vertex_count() || initial.dimension() != config.dimension) {
        throw ShapeError("initial table does not match the graph and dimension");
    }
    for (const auto& r : samples.records()) {
        if (r.left >= g.vertex_count() || r.right >= g.vertex_count()) {
            throw MalformedRecordError("record references a vertex outside the graph");
        }
    }
    TrainResult result{std::move(initial), {}};
    if (samples.empty()) return result;

    auto& table = result.table;
    AdagradState state{std::vector<double>(table.values().size(), 0.0)};
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 1));
    const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    const unsigned workers = std::max(1u, config.threads);
    const std::size_t max_rows = 2 + 2 * samples.gamma_size();

    const double initial_loss = full_loss(table, samples, config);
    if (!std::isfinite(initial_loss)) throw DivergenceError(0, "initial loss is not finite");
    result.loss_trace.push_back(initial_loss);

    std::vector<SparseGradient> grads;
    for (unsigned w = 0; w < workers; ++w) grads.emplace_back(g.vertex_count(), config.dimension);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        auto batch_at = [&](std::size_t b) {
            const std::size_t begin = b * config.batch_size;
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            return std::span<const std::size_t>(order.data() + begin, end - begin);
        };
        if (workers == 1) {
            DirectRows direct{table};
            for (std::size_t b = 0; b < n_batches; ++b) {
                accumulate(direct, config.dimension, samples, batch_at(b), config.loss,
                           config.prob_floor, grads[0]);
                adagrad_step(table, state, grads[0], config, false);
            }
        } else {
            detail::parallel_chunks(n_batches, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
                SnapshotRows snap(table, max_rows);
                for (std::size_t b = begin; b < end; ++b) {
                    accumulate(snap, config.dimension, samples, batch_at(b), config.loss,
                               config.prob_floor, grads[w]);
                    adagrad_step(table, state, grads[w], config, true);
                }
            });
        }
        const double loss = full_loss(table, samples, config);
        if (!std::isfinite(loss)) throw DivergenceError(epoch, "loss is not finite");
        result.loss_trace.push_back(loss);
    }
    return result;
}

void write_loss_trace(std::ostream& out, std::span<const double> trace) {
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < trace.size(); ++e) {
        out << e << ',' << detail::format_double(trace[e]) << '\n';
    }
}

}  // namespace bipembed
