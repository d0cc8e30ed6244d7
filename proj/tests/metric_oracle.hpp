#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "bipembed/metrics.hpp"

namespace testing {

/// Textbook top-k metrics, recomputed from scratch per cut-off.
struct OracleMetrics {
    double f1, ndcg, map, mrr;
};

inline OracleMetrics oracle_metrics(const std::vector<std::uint32_t>& ranked,
                                    const std::vector<bool>& is_rel, std::size_t k) {
    auto rel = [&](std::size_t pos) { return pos < ranked.size() && is_rel[ranked[pos]]; };
    const auto total = static_cast<std::size_t>(std::count(is_rel.begin(), is_rel.end(), true));
    auto hits_upto = [&](std::size_t n) {
        std::size_t h = 0;
        for (std::size_t i = 0; i < n; ++i) h += rel(i);
        return h;
    };
    OracleMetrics m{0, 0, 0, 0};
    const double precision = double(hits_upto(k)) / double(k);
    const double recall = double(hits_upto(k)) / double(total);
    m.f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (rel(i)) dcg += 1.0 / std::log2(double(i) + 2.0);
        if (i < total) idcg += 1.0 / std::log2(double(i) + 2.0);
    }
    m.ndcg = dcg / idcg;
    double ap = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        if (rel(i)) ap += double(hits_upto(i + 1)) / double(i + 1);
    m.map = ap / double(std::min(total, k));
    for (std::size_t i = 0; i < k; ++i)
        if (rel(i)) {
            m.mrr = 1.0 / double(i + 1);
            break;
        }
    return m;
}

struct OracleSweep {
    std::size_t cases = 0;
    std::size_t mismatches = 0;
    double worst = 0.0;
};

/// Every permutation of n <= max_items items, every relevance subset, every
/// k in [1, n + 1].
inline OracleSweep metric_oracle_sweep(std::uint32_t max_items, double tol) {
    OracleSweep out;
    for (std::uint32_t n = 1; n <= max_items; ++n) {
        std::vector<std::uint32_t> perm(n);
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            std::vector<bool> is_rel(n);
            std::unordered_set<std::uint32_t> relevant;
            for (std::uint32_t i = 0; i < n; ++i)
                if (mask >> i & 1u) {
                    is_rel[i] = true;
                    relevant.insert(i);
                }
            std::iota(perm.begin(), perm.end(), 0u);
            do {
                for (std::size_t k = 1; k <= n + 1; ++k) {
                    ++out.cases;
                    const auto got = bipembed::metrics_at_k(perm, relevant, k);
                    if (mask == 0) {
                        if (got) ++out.mismatches;
                        continue;
                    }
                    if (!got) {
                        ++out.mismatches;
                        continue;
                    }
                    const auto want = oracle_metrics(perm, is_rel, k);
                    const double err = std::max({std::abs(got->f1 - want.f1), std::abs(got->ndcg - want.ndcg),
                                                 std::abs(got->map - want.map), std::abs(got->mrr - want.mrr)});
                    out.worst = std::max(out.worst, err);
                    if (!(err <= tol)) ++out.mismatches;
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
    }
    return out;
}

}  // namespace testing
