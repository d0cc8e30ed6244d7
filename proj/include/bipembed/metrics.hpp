#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>

namespace bipembed {

enum class GainMode : std::uint8_t {
    Linear,       // rel
    Exponential,  // 2^rel - 1
};

struct RankMetrics {
    double f1 = 0.0;
    double ndcg = 0.0;
    double map = 0.0;
    double mrr = 0.0;
};

/// Top-k ranking quality. Items with positive grade are relevant. Returns
/// nothing when the relevant set is empty.
std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        const std::unordered_map<std::uint32_t, double>& grades,
                                        std::size_t k, GainMode gain = GainMode::Linear);
std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        const std::unordered_set<std::uint32_t>& relevant,
                                        std::size_t k, GainMode gain = GainMode::Linear);

}  // namespace bipembed
