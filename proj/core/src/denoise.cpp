#include "dna/denoise.hpp"

#include "dna/error.hpp"

#include <algorithm>

namespace dna {

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::raw: return "knn";
        case Stage::label: return "label";
        case Stage::reciprocal: return "reciprocal";
        case Stage::rank: return "rank";
    }
    return "?";
}

const std::vector<IndexList>& NeighborSets::stage(Stage s) const {
    switch (s) {
        case Stage::raw: return raw;
        case Stage::label: return label;
        case Stage::reciprocal: return reciprocal;
        case Stage::rank: return rank;
    }
    return raw;
}

double NeighborSets::mean_size(Stage s) const {
    const auto& sets = stage(s);
    if (sets.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& l : sets) total += l.size();
    return static_cast<double>(total) / static_cast<double>(sets.size());
}

IndexList label_filter(std::span<const Index> neighbors, int query_coarse, std::span<const int> bank_labels) {
    IndexList out;
    out.reserve(neighbors.size());
    for (Index j : neighbors) {
        if (j >= bank_labels.size()) throw StructuralError("label_filter: neighbor index outside the bank");
        if (bank_labels[j] == query_coarse) out.push_back(j);
    }
    return out;
}

std::vector<IndexList> reciprocal_filter(const std::vector<IndexList>& all_a) {
    std::vector<IndexList> sorted(all_a);
    for (auto& l : sorted) std::sort(l.begin(), l.end());

    std::vector<IndexList> out(all_a.size());
    for (Index i = 0; i < all_a.size(); ++i) {
        out[i].reserve(all_a[i].size());
        for (Index j : all_a[i]) {
            if (j >= sorted.size()) throw StructuralError("reciprocal_filter: neighbor index without its own set");
            if (std::binary_search(sorted[j].begin(), sorted[j].end(), i)) out[i].push_back(j);
        }
    }
    return out;
}

IndexList rank_filter(std::span<const Index> neighbors, const RankSet& query_rank,
                      const std::vector<RankSet>& bank_rank_sets) {
    IndexList out;
    out.reserve(neighbors.size());
    for (Index j : neighbors) {
        if (j >= bank_rank_sets.size()) throw StructuralError("rank_filter: neighbor index outside the bank");
        if (bank_rank_sets[j] == query_rank) out.push_back(j);
    }
    return out;
}

NeighborSets refine_all(FeatureBank& bank, const Matrix& queries, std::span<const int> query_coarse,
                        std::vector<IndexList> raw, std::size_t epoch, const FilterSettings& settings) {
    const std::size_t n = raw.size();
    if (query_coarse.size() != n || static_cast<std::size_t>(queries.rows()) != n) {
        throw StructuralError("refine_all: queries, labels and raw sets differ in count");
    }
    NeighborSets sets;
    sets.raw = std::move(raw);

    if (settings.label) {
        sets.label.resize(n);
        for (Index i = 0; i < n; ++i) sets.label[i] = label_filter(sets.raw[i], query_coarse[i], bank.coarse_labels());
    } else {
        sets.label = sets.raw;
    }

    if (settings.reciprocal) {
        if (n != bank.size()) throw StructuralError("reciprocal filter needs one query per bank row");
        sets.reciprocal = reciprocal_filter(sets.label);
    } else {
        sets.reciprocal = sets.label;
    }

    if (epoch < settings.rank_epochs) {
        bank.refresh_rank_sets(settings.m_rank, settings.rank_by_abs);
        const auto& bank_ranks = bank.rank_sets();
        sets.rank.resize(n);
        for (Index i = 0; i < n; ++i) {
            const RankSet qr = rank_set(row_span(queries, static_cast<Eigen::Index>(i)), settings.m_rank,
                                        settings.rank_by_abs);
            sets.rank[i] = rank_filter(sets.reciprocal[i], qr, bank_ranks);
        }
    } else {
        sets.rank = sets.reciprocal;
    }
    return sets;
}

}  // namespace dna
