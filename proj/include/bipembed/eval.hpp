#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bipembed/embedding.hpp"
#include "bipembed/graph.hpp"
#include "bipembed/metrics.hpp"
#include "bipembed/pipeline.hpp"
#include "bipembed/svm.hpp"

namespace bipembed {

enum class EvalTask : std::uint8_t { APersonalized, BPersonalized, Unified, Recommend };

std::string_view to_string(EvalTask t) noexcept;

struct UnifiedParams {
    std::size_t hidden = 0;  // 0: embedding dimension
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double adagrad_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct LinkEvalParams {
    SvmParams svm;
    std::size_t negatives_per_positive = 5;
    UnifiedParams unified;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Original graph of a split: training edges plus removed edges.
BipartiteGraph original_graph(const HoldoutSplit& split);

/// Mean per-node accuracy of per-node RBF SVMs for every node of `part`
/// with at least one held-out edge. Throws EmptyTaskError when no node
/// qualifies.
double personalized_eval(const HoldoutSplit& split, const EmbeddingTable& embedding, Part part,
                         const LinkEvalParams& params = {});

/// Accuracy of an MLP over concatenated pair embeddings on removed edges
/// versus the split's negatives, at threshold 0.5.
double unified_eval(const HoldoutSplit& split, const EmbeddingTable& embedding,
                    const LinkEvalParams& params = {});

/// Rating-weighted mean of the embeddings of a user's rated items; nothing
/// when the user has no ratings or zero total weight.
std::optional<std::vector<double>> user_centroid(const RatingGraph& ratings,
                                                 const EmbeddingTable& embedding,
                                                 std::uint32_t user);

/// Item indices by descending dot product with `centroid`, ties by ascending
/// index. item_rows[j] is item j's embedding row (nothing: not rankable).
std::vector<std::uint32_t> rank_items(std::span<const double> centroid,
                                      const EmbeddingTable& embedding,
                                      std::span<const std::optional<std::size_t>> item_rows,
                                      const std::unordered_set<std::uint32_t>& exclude,
                                      std::size_t limit = static_cast<std::size_t>(-1));

struct EvalEntry {
    std::string method;
    EvalTask task = EvalTask::Unified;
    double h_or_k = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
    bool valid = true;
    std::string message;  // error text of an invalid cell
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    std::vector<std::uint64_t> seeds;
    double runtime_seconds = 0.0;

    struct CellKey {
        std::string method;
        EvalTask task;
        double h_or_k;
        std::string metric;
        friend auto operator<=>(const CellKey&, const CellKey&) = default;
    };
    /// Mean over seeds of the valid entries of each cell.
    std::map<CellKey, double> means() const;
};

/// CSV `method,task,h_or_k,seed,metric,value`; invalid cells carry `invalid`.
void write_report(std::ostream& out, const EvalReport& report);

/// Per (h, seed): split, embed with each method, and run the three link tasks.
EvalReport run_link_experiment(const BipartiteGraph& g, std::span<const EmbeddingMethod> methods,
                               std::span<const double> holdouts,
                               std::span<const std::uint64_t> seeds,
                               const PipelineConfig& config, const LinkEvalParams& params = {});

/// Link tasks while varying samples per node. Each trial is an independent
/// holdout split shared by every grid value; the h_or_k column carries the
/// samples-per-node value and seed the trial index.
EvalReport run_sweep(const BipartiteGraph& g, EmbeddingMethod method,
                     std::span<const std::size_t> samples_per_node, std::size_t trials,
                     double holdout, std::uint64_t seed, const PipelineConfig& config,
                     const LinkEvalParams& params = {});

struct RecSplit {
    RatingGraph training;          // every node kept, test ratings removed
    std::vector<Edge> test;
    std::vector<double> test_weights;
};

/// Seeded shuffle of the rating edges; the last `holdout` fraction is test.
RecSplit split_ratings(const RatingGraph& ratings, double holdout, std::uint64_t seed);

struct RecParams {
    double holdout = 0.4;
    std::size_t k = 10;
    GainMode gain = GainMode::Linear;
    unsigned threads = 1;
};

/// Mean F1/NDCG/MAP/MRR@k over users with training and test ratings.
RankMetrics recommend_eval(const RecSplit& split, const EmbeddingTable& embedding,
                           const RecParams& params, std::size_t* users_evaluated = nullptr);

EvalReport run_rec_experiment(const RatingGraph& ratings, std::span<const EmbeddingMethod> methods,
                              std::uint64_t seed, const PipelineConfig& config,
                              const RecParams& params = {});

}  // namespace bipembed
