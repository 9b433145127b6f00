#pragma once

#include "dna/tensor.hpp"

#include <span>
#include <vector>

namespace dna {

/// Indices of the m largest coordinates of an embedding, kept sorted
/// ascending so that equality is set equality.
struct RankSet {
    std::vector<Index> indices;

    friend bool operator==(const RankSet&, const RankSet&) = default;
};

/// Top-`m` coordinates by signed value (or by |value| when `by_abs`), ties
/// broken toward the lower index. Throws StructuralError when m is 0 or
/// exceeds the vector length.
RankSet rank_set(std::span<const double> v, std::size_t m, bool by_abs = false);

std::vector<RankSet> rank_sets(const Matrix& rows, std::size_t m, bool by_abs = false);

}  // namespace dna
