#pragma once

#include "dna/membank.hpp"
#include "dna/rank_set.hpp"
#include "dna/tensor.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace dna {

/// Neighbor filtering pipeline: raw k-NN -> same coarse label -> mutual
/// membership -> identical rank set. Disabled stages pass their input through.
struct FilterSettings {
    bool label = true;
    bool reciprocal = true;
    std::size_t rank_epochs = 1;  // rank filter active while epoch < rank_epochs
    std::size_t m_rank = 5;
    bool rank_by_abs = false;
};

enum class Stage { raw = 0, label = 1, reciprocal = 2, rank = 3 };
inline constexpr std::array<Stage, 4> kStages{Stage::raw, Stage::label, Stage::reciprocal, Stage::rank};
std::string_view stage_name(Stage s);

/// Per-query ordered neighbor lists after each stage. Query i is training
/// row i and its lists index bank rows.
struct NeighborSets {
    std::vector<IndexList> raw;
    std::vector<IndexList> label;
    std::vector<IndexList> reciprocal;
    std::vector<IndexList> rank;

    const std::vector<IndexList>& stage(Stage s) const;
    // Sets used as positive keys by the loss.
    const std::vector<IndexList>& positives() const { return rank; }
    std::size_t size() const { return raw.size(); }
    double mean_size(Stage s) const;

    friend bool operator==(const NeighborSets&, const NeighborSets&) = default;
};

IndexList label_filter(std::span<const Index> neighbors, int query_coarse, std::span<const int> bank_labels);

/// R_i = { j in A_i : i in A_j }. `all_a` must hold one list per bank row.
std::vector<IndexList> reciprocal_filter(const std::vector<IndexList>& all_a);

IndexList rank_filter(std::span<const Index> neighbors, const RankSet& query_rank,
                      const std::vector<RankSet>& bank_rank_sets);

/// Applies the enabled filters in order. `queries` are the current query
/// embeddings (one row per training sample) used for the query-side rank
/// sets; bank rank sets are refreshed lazily here.
NeighborSets refine_all(FeatureBank& bank, const Matrix& queries, std::span<const int> query_coarse,
                        std::vector<IndexList> raw, std::size_t epoch, const FilterSettings& settings);

}  // namespace dna
