#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bipembed/algdist.hpp"
#include "bipembed/graph.hpp"

namespace bipembed {

enum class RecordKind : std::uint8_t { AA, BB, AB };

std::string_view to_string(RecordKind k) noexcept;

/// One observed similarity. AB records carry two neighborhood samples of
/// size gamma_size stored in the owning SampleSet: gamma_left holds part-A
/// nodes drawn from the right endpoint's neighborhood and gamma_right holds
/// part-B nodes drawn from the left endpoint's neighborhood.
struct SampleRecord {
    RecordKind kind = RecordKind::AA;
    Vertex left = 0;
    Vertex right = 0;
    std::uint32_t gamma_block = 0;
    double target = 0.0;
};

class SampleSet {
public:
    explicit SampleSet(std::size_t gamma_size = 0) : gamma_size_(gamma_size) {}

    void add_same(RecordKind kind, Vertex left, Vertex right, double target);
    void add_cross(Vertex left, Vertex right, std::span<const Vertex> gamma_left,
                   std::span<const Vertex> gamma_right, double target);
    /// Appends another set's records in order.
    void append(const SampleSet& other);

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t gamma_size() const noexcept { return gamma_size_; }
    std::span<const SampleRecord> records() const noexcept { return records_; }
    const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

    std::span<const Vertex> gamma_left(const SampleRecord& r) const;
    std::span<const Vertex> gamma_right(const SampleRecord& r) const;

    /// Nodes with no neighbors, skipped during sampling.
    std::size_t skipped_nodes = 0;
    /// Negative records abandoned after exhausting their retries.
    std::size_t skipped_negatives = 0;

private:
    std::size_t gamma_size_;
    std::vector<SampleRecord> records_;
    std::vector<Vertex> gammas_;
};

struct SamplerParams {
    std::size_t samples_per_node = 200;  // s_r
    std::size_t gamma_size = 5;          // s_gamma
    double negative_ratio = 1.0;         // nu; ceil(nu) negatives per positive
    std::uint64_t seed = 0;
    KhopMode khop = KhopMode::Walk;
    unsigned threads = 1;
};

/// Rejection attempts for one negative record before it is skipped.
inline constexpr int kNegativeRetries = 20;

/// 1 iff the two same-part nodes share a neighbor.
int fobe_observe_same(const BipartiteGraph& g, Vertex i, Vertex j);
int fobe_observe_same(const BipartiteGraph& g, NodeId i, NodeId j);

SampleSet fobe_sample(const BipartiteGraph& g, const SamplerParams& params);

/// Strongest shared bridge: max over common neighbors k of
/// min(s(i, k), s(j, k)); 0 without common neighbors.
double hobe_observe_same(const BipartiteGraph& g, const EdgeSimilarities& sims, Vertex i,
                         Vertex j);

/// Strongest first-order link between one endpoint and the other's
/// neighborhood, taken over both directions. Arguments may come in either
/// order but must lie in different parts.
double hobe_observe_cross(const BipartiteGraph& g, const EdgeSimilarities& sims, Vertex i,
                          Vertex j);

/// Reusable scratch space for repeated cross-part observations.
class CrossObserver {
public:
    CrossObserver(const BipartiteGraph& g, const EdgeSimilarities& sims);
    double operator()(Vertex alpha, Vertex beta);

private:
    const BipartiteGraph* g_;
    const EdgeSimilarities* sims_;
    std::vector<double> mark_;  // s(y, beta) for y in N(beta), else -1
};

SampleSet hobe_sample(const BipartiteGraph& g, const EdgeSimilarities& sims,
                      const SamplerParams& params);

/// `kind<TAB>left<TAB>right<TAB>target<TAB>gamma_left,...<TAB>gamma_right,...`
void write_samples(std::ostream& out, const BipartiteGraph& g, const SampleSet& samples);
SampleSet read_samples(std::istream& in, const BipartiteGraph& g);

}  // namespace bipembed
