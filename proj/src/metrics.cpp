#include "bipembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bipembed/error.hpp"

namespace bipembed {

namespace {

double gain_of(double rel, GainMode mode) {
    return mode == GainMode::Linear ? rel : std::exp2(rel) - 1.0;
}

}  // namespace

std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        const std::unordered_map<std::uint32_t, double>& grades,
                                        std::size_t k, GainMode gain) {
    if (k == 0) throw ParameterError("k must be at least 1");
    std::vector<double> ideal;
    for (const auto& [item, g] : grades)
        if (g > 0.0) ideal.push_back(g);
    if (ideal.empty()) return std::nullopt;
    const std::size_t relevant = ideal.size();

    RankMetrics m;
    std::size_t hits = 0;
    double dcg = 0.0, precision_sum = 0.0;
    const std::size_t depth = std::min(k, ranked.size());
    for (std::size_t i = 0; i < depth; ++i) {
        const auto it = grades.find(ranked[i]);
        if (it == grades.end() || it->second <= 0.0) continue;
        ++hits;
        dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
        precision_sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        if (hits == 1) m.mrr = 1.0 / static_cast<double>(i + 1);
    }

    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
        idcg += gain_of(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
    m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;

    m.map = precision_sum / static_cast<double>(std::min(relevant, k));
    if (hits > 0) {
        const double p = static_cast<double>(hits) / static_cast<double>(k);
        const double r = static_cast<double>(hits) / static_cast<double>(relevant);
        m.f1 = 2.0 * p * r / (p + r);
    }
    return m;
}

std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        const std::unordered_set<std::uint32_t>& relevant,
                                        std::size_t k, GainMode gain) {
    std::unordered_map<std::uint32_t, double> grades;
    for (const auto item : relevant) grades.emplace(item, 1.0);
    return metrics_at_k(ranked, grades, k, gain);
}

}  // namespace bipembed
