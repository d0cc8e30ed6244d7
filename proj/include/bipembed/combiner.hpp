#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bipembed/embedding.hpp"
#include "bipembed/graph.hpp"
#include "bipembed/nn.hpp"

namespace bipembed {

enum class CombineMode : std::uint8_t { Direct, AutoRegularized };

std::string_view to_string(CombineMode m) noexcept;

struct CombinerConfig {
    std::size_t combined_dim = 100;  // k'
    CombineMode mode = CombineMode::Direct;
    double dropout = 0.5;
    std::size_t negatives_per_node = 5;
    std::size_t epochs = 10;
    double learning_rate = 0.01;
    double adagrad_eps = 1e-8;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // extraction only; training stays sequential
};

/// Joint projection network. Each part owns an encoder
/// (input -> hidden ReLU -> combined tanh) and, in auto-regularized mode, a
/// decoder (combined -> hidden ReLU -> input, linear). A shared link head maps
/// the concatenated combined vectors through a k' ReLU layer to a sigmoid
/// score.
class CombinerModel {
public:
    CombinerModel() = default;
    CombinerModel(CombineMode mode, std::size_t input_dim, std::size_t combined_dim,
                  double dropout, std::uint64_t seed);

    CombineMode mode() const noexcept { return mode_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t combined_dim() const noexcept { return combined_dim_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    double dropout() const noexcept { return dropout_; }

    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    struct PartLayers {
        nn::DenseLayer encode_hidden;
        nn::DenseLayer encode_out;
        nn::DenseLayer decode_hidden;
        nn::DenseLayer decode_out;
    };
    const PartLayers& part(Part p) const noexcept { return parts_[p == Part::A ? 0 : 1]; }
    const nn::DenseLayer& head_hidden() const noexcept { return head_hidden_; }
    const nn::DenseLayer& head_out() const noexcept { return head_out_; }

    /// All layers in checkpoint order.
    std::vector<nn::DenseLayer> layers() const;

private:
    CombineMode mode_ = CombineMode::Direct;
    std::size_t input_dim_ = 0;
    std::size_t combined_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    double dropout_ = 0.5;
    std::vector<double> params_;
    PartLayers parts_[2];
    nn::DenseLayer head_hidden_;
    nn::DenseLayer head_out_;
};

/// Intermediate values of one forward pass, kept for backpropagation.
struct CombinerForward {
    struct PartState {
        std::vector<double> input;  // after dropout
        std::vector<double> hidden_pre, hidden;
        std::vector<double> combined_pre, combined;
        std::vector<double> decode_pre, decode_hidden;
        std::vector<double> out_pre, out;
    };
    PartState part[2];
    std::vector<double> head_in;
    std::vector<double> head_pre, head_hidden;
    double score_pre = 0.0;
    double score = 0.0;

    const std::vector<double>& combined_a() const noexcept { return part[0].combined; }
    const std::vector<double>& combined_b() const noexcept { return part[1].combined; }
    const std::vector<double>& out_a() const noexcept { return part[0].out; }
    const std::vector<double>& out_b() const noexcept { return part[1].out; }
};

/// [e_1(v) e_2(v) ... ] in table order; LookupError if a table lacks v.
std::vector<double> concat_input(std::span<const EmbeddingTable> tables, const BipartiteGraph& g,
                                 NodeId v);

struct CombinerPair {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double target = 0.0;
};

struct CombinerTrainingSet {
    std::vector<CombinerPair> pairs;
    /// Negatives that could not be drawn because a node had too few non-neighbors.
    std::size_t shortfall = 0;
};

/// Every edge with target 1, plus up to `negatives_per_node` distinct
/// non-neighbor pairs per node with target 0.
CombinerTrainingSet build_combiner_training_set(const BipartiteGraph& g, std::uint64_t seed,
                                                std::size_t negatives_per_node = 5);

/// Inverted dropout on both inputs when `training`.
CombinerForward combiner_forward(const CombinerModel& m, std::span<const double> in_a,
                                 std::span<const double> in_b, bool training, Rng& rng);

/// Per-node projection only (inference mode).
std::vector<double> combiner_project(const CombinerModel& m, Part part,
                                     std::span<const double> input);

struct CombinerLoss {
    double link = 0.0;            // (target - score)^2
    double reconstruction = 0.0;  // ||in_a - out_a|| + ||in_b - out_b||
    double total = 0.0;
};

/// Loss of one sample; inputs are the pre-dropout vectors.
CombinerLoss combiner_sample_loss(const CombinerModel& m, double target,
                                  std::span<const double> in_a, std::span<const double> in_b,
                                  const CombinerForward& f);

struct CombinerExample {
    double target = 0.0;
    std::vector<double> in_a;
    std::vector<double> in_b;
    CombinerForward forward;
};

/// Mean loss over a batch of evaluated samples.
CombinerLoss combiner_loss(const CombinerModel& m, std::span<const CombinerExample> batch);

/// Adds scale * d(sample loss)/d(params) to grad.
void combiner_backward(const CombinerModel& m, double target, std::span<const double> in_a,
                       std::span<const double> in_b, const CombinerForward& f, double scale,
                       std::span<double> grad);

struct CombinerResult {
    CombinerModel model;
    EmbeddingTable combined;
    /// Inference-mode mean loss over the training set; entry 0 is pre-training.
    std::vector<CombinerLoss> trace;
    std::size_t negative_shortfall = 0;
};

CombinerResult train_combiner(std::span<const EmbeddingTable> tables, const BipartiteGraph& g,
                              const CombinerConfig& config);

void write_combiner(std::ostream& out, const CombinerModel& m);
CombinerModel read_combiner(std::istream& in);

}  // namespace bipembed
