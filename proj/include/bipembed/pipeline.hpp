#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "bipembed/algdist.hpp"
#include "bipembed/combiner.hpp"
#include "bipembed/embedding.hpp"
#include "bipembed/graph.hpp"
#include "bipembed/sampler.hpp"
#include "bipembed/trainer.hpp"

namespace bipembed {

enum class EmbeddingMethod : std::uint8_t { Fobe, Hobe, CombineDirect, CombineAutoreg };

std::string_view to_string(EmbeddingMethod m) noexcept;
/// Accepts fobe, hobe, direct, autoreg (case-insensitive).
std::optional<EmbeddingMethod> parse_method(std::string_view s);

/// Hyperparameters of every stage. Stage seeds are derived from `seed`.
struct PipelineConfig {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    SamplerParams sampler;
    JorParams jor;
    TrainConfig train;
    CombinerConfig combiner;
    /// Use the estimate-weighted log ratio for FOBE instead of KL.
    bool printed_kl = false;
};

/// Copy of `config` with every stage seed derived from `seed` and threads set.
PipelineConfig seeded(const PipelineConfig& config, std::uint64_t seed);

/// FOBE and HOBE tables reused by the combination methods.
struct EmbedCache {
    std::optional<EmbeddingTable> fobe;
    std::optional<EmbeddingTable> hobe;
};

EmbeddingTable embed_fobe(const BipartiteGraph& g, const PipelineConfig& config);
EmbeddingTable embed_hobe(const BipartiteGraph& g, const PipelineConfig& config);

/// Runs sampling and training (and the combiner when requested) on g.
EmbeddingTable embed(const BipartiteGraph& g, EmbeddingMethod method, const PipelineConfig& config,
                     EmbedCache* cache = nullptr);

}  // namespace bipembed
