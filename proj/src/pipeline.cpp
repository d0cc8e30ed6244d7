#include "bipembed/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace bipembed {

std::string_view to_string(EmbeddingMethod m) noexcept {
    switch (m) {
        case EmbeddingMethod::Fobe: return "fobe";
        case EmbeddingMethod::Hobe: return "hobe";
        case EmbeddingMethod::CombineDirect: return "direct";
        case EmbeddingMethod::CombineAutoreg: return "autoreg";
    }
    return "?";
}

std::optional<EmbeddingMethod> parse_method(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "fobe") return EmbeddingMethod::Fobe;
    if (lower == "hobe") return EmbeddingMethod::Hobe;
    if (lower == "direct" || lower == "combine_direct") return EmbeddingMethod::CombineDirect;
    if (lower == "autoreg" || lower == "combine_autoreg") return EmbeddingMethod::CombineAutoreg;
    return std::nullopt;
}

PipelineConfig seeded(const PipelineConfig& config, std::uint64_t seed) {
    PipelineConfig c = config;
    c.seed = seed;
    c.jor.seed = derive_seed(seed, 10);
    c.sampler.seed = derive_seed(seed, 11);
    c.train.seed = derive_seed(seed, 12);
    c.combiner.seed = derive_seed(seed, 13);
    c.sampler.threads = config.threads;
    c.train.threads = config.threads;
    c.combiner.threads = config.threads;
    return c;
}

EmbeddingTable embed_fobe(const BipartiteGraph& g, const PipelineConfig& config) {
    const auto samples = fobe_sample(g, config.sampler);
    TrainConfig tc = config.train;
    tc.loss = config.printed_kl ? LossKind::FobeKlPrinted : LossKind::FobeKl;
    return train(samples, g, tc).table;
}

EmbeddingTable embed_hobe(const BipartiteGraph& g, const PipelineConfig& config) {
    const auto coords = jor_relax(g, config.jor, config.threads);
    const auto sims = edge_similarities(g, coords);
    const auto samples = hobe_sample(g, sims, config.sampler);
    TrainConfig tc = config.train;
    tc.loss = LossKind::HobeMse;
    tc.seed = derive_seed(config.train.seed, 1);
    return train(samples, g, tc).table;
}

EmbeddingTable embed(const BipartiteGraph& g, EmbeddingMethod method, const PipelineConfig& config,
                     EmbedCache* cache) {
    EmbedCache local;
    EmbedCache& c = cache ? *cache : local;
    auto fobe = [&]() -> const EmbeddingTable& {
        if (!c.fobe) c.fobe = embed_fobe(g, config);
        return *c.fobe;
    };
    auto hobe = [&]() -> const EmbeddingTable& {
        if (!c.hobe) c.hobe = embed_hobe(g, config);
        return *c.hobe;
    };
    switch (method) {
        case EmbeddingMethod::Fobe: return fobe();
        case EmbeddingMethod::Hobe: return hobe();
        case EmbeddingMethod::CombineDirect:
        case EmbeddingMethod::CombineAutoreg: {
            const EmbeddingTable tables[2] = {fobe(), hobe()};
            CombinerConfig cc = config.combiner;
            cc.mode = method == EmbeddingMethod::CombineDirect ? CombineMode::Direct
                                                               : CombineMode::AutoRegularized;
            return train_combiner(tables, g, cc).combined;
        }
    }
    return fobe();
}

}  // namespace bipembed
