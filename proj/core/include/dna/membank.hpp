#pragma once

#include "dna/encoder.hpp"
#include "dna/rank_set.hpp"
#include "dna/synthdata.hpp"
#include "dna/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dna {

inline constexpr double kUnitNormTolerance = 1e-6;

/// Identity-addressable store of momentum-encoder keys, one row per training
/// sample (row i is training-split row i). Keys are only reachable through
/// const accessors so loss code cannot mutate them.
class FeatureBank {
public:
    FeatureBank() = default;
    FeatureBank(Matrix keys, std::vector<int> coarse_labels);

    const Matrix& keys() const { return keys_; }
    std::span<const int> coarse_labels() const { return coarse_; }
    std::size_t size() const { return static_cast<std::size_t>(keys_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(keys_.cols()); }
    std::uint64_t version() const { return version_; }

    /// Replaces rows `ids` with `new_keys` (one row each) and bumps the version.
    void update(std::span<const Index> ids, const Matrix& new_keys);

    /// Recomputes cached rank sets if the bank changed since the last call or
    /// the rank parameters differ.
    void refresh_rank_sets(std::size_t m, bool by_abs);
    /// Cached rank sets; throws StructuralError if they are stale.
    const std::vector<RankSet>& rank_sets() const;
    bool rank_sets_current() const { return rank_version_ == version_ && !rank_cache_.empty(); }

    friend bool operator==(const FeatureBank& a, const FeatureBank& b) {
        return a.keys_.rows() == b.keys_.rows() && a.keys_.cols() == b.keys_.cols() && a.keys_ == b.keys_ &&
               a.coarse_ == b.coarse_;
    }

private:
    Matrix keys_;
    std::vector<int> coarse_;
    std::uint64_t version_ = 0;

    std::vector<RankSet> rank_cache_;
    std::uint64_t rank_version_ = ~std::uint64_t{0};
    std::size_t rank_m_ = 0;
    bool rank_by_abs_ = false;
};

/// One momentum-encoder pass over the training split.
FeatureBank init_bank(const CoarseView& train, const ParameterSet& momentum);

/// Cosine similarity; throws NumericError if either vector is zero.
double cosine_sim(std::span<const double> q, std::span<const double> h);

/// Indices of the `k` bank rows most similar to `q` (dot product; both sides
/// are unit-norm), excluding `self`, ordered by similarity descending with
/// ties toward the lower index. `k` is clamped to the number of candidates;
/// when that happens `*clamped` is set, or a warning is logged if `clamped`
/// is null.
IndexList topk_neighbors(const FeatureBank& bank, std::optional<Index> self, std::span<const double> q,
                         std::size_t k, bool* clamped = nullptr);

/// Same retrieval over an arbitrary set of unit-norm rows.
IndexList topk_neighbors(const Matrix& keys, std::optional<Index> self, std::span<const double> q, std::size_t k,
                         bool* clamped = nullptr);

inline std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace dna
