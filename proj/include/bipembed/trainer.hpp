#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bipembed/embedding.hpp"
#include "bipembed/graph.hpp"
#include "bipembed/sampler.hpp"

namespace bipembed {

enum class LossKind : std::uint8_t {
    /// KL(observed || estimated) over clamped Bernoulli pairs.
    FobeKl,
    /// Estimate-weighted log ratio, p * log(t / p), kept for comparison.
    FobeKlPrinted,
    /// Squared error with ReLU estimators.
    HobeMse,
};

struct TrainConfig {
    std::size_t dimension = 100;
    std::size_t epochs = 10;
    double learning_rate = 0.1;
    double adagrad_eps = 1e-8;
    double prob_floor = 1e-6;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::FobeKl;
    /// >1 switches to lock-free sharded updates (not bit-reproducible).
    unsigned threads = 1;
};

/// Throws ParameterError on the first invalid field.
void validate(const TrainConfig& config);

/// Entries i.i.d. uniform in [-1/(2r), 1/(2r)].
EmbeddingTable init_embeddings(const BipartiteGraph& g, std::size_t dimension, std::uint64_t seed);

double sigmoid(double x) noexcept;

double fobe_estimate(const EmbeddingTable& table, const SampleSet& samples, const SampleRecord& r);
double hobe_estimate(const EmbeddingTable& table, const SampleSet& samples, const SampleRecord& r);

/// Mean per-record loss over the listed records (all records when empty).
double fobe_loss(const EmbeddingTable& table, const SampleSet& samples,
                 std::span<const std::size_t> batch, double prob_floor, bool printed = false);
double hobe_loss(const EmbeddingTable& table, const SampleSet& samples,
                 std::span<const std::size_t> batch);
double batch_loss(const EmbeddingTable& table, const SampleSet& samples,
                  std::span<const std::size_t> batch, LossKind kind, double prob_floor);

/// Per-coordinate gradient restricted to the rows it touches.
class SparseGradient {
public:
    SparseGradient(std::size_t rows, std::size_t dimension);

    void add(Vertex v, double coef, const double* x);
    std::span<const Vertex> touched() const noexcept { return touched_; }
    std::span<double> row(Vertex v) { return {values_.data() + v * dimension_, dimension_}; }
    std::span<const double> row(Vertex v) const {
        return {values_.data() + v * dimension_, dimension_};
    }
    void clear();

private:
    std::size_t dimension_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mark_;
    std::vector<Vertex> touched_;
};

/// Adds the gradient of the mean batch loss to `grad`; returns that loss.
double accumulate_gradient(const EmbeddingTable& table, const SampleSet& samples,
                           std::span<const std::size_t> batch, LossKind kind, double prob_floor,
                           SparseGradient& grad);

/// Squared-gradient accumulator with the embedding table's shape.
struct AdagradState {
    std::vector<double> accumulated;
};

struct TrainResult {
    EmbeddingTable table;
    /// Mean loss over all records: entry 0 before training, entry e after epoch e.
    std::vector<double> loss_trace;
};

TrainResult train(const SampleSet& samples, const BipartiteGraph& g, const TrainConfig& config);
TrainResult train(const SampleSet& samples, const BipartiteGraph& g, const TrainConfig& config,
                  EmbeddingTable initial);

/// CSV `epoch,loss`.
void write_loss_trace(std::ostream& out, std::span<const double> trace);

}  // namespace bipembed
