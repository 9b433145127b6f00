#include "dna/rank_set.hpp"

#include "dna/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dna {

RankSet rank_set(std::span<const double> v, std::size_t m, bool by_abs) {
    if (m == 0 || m > v.size()) {
        throw StructuralError("rank_set: m=" + std::to_string(m) + " must lie in [1, " + std::to_string(v.size()) + "]");
    }
    IndexList order(v.size());
    std::iota(order.begin(), order.end(), Index{0});
    const auto key = [&](Index i) { return by_abs ? std::abs(v[i]) : v[i]; };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](Index a, Index b) { return key(a) > key(b) || (key(a) == key(b) && a < b); });
    RankSet rs{IndexList(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m))};
    std::sort(rs.indices.begin(), rs.indices.end());
    return rs;
}

std::vector<RankSet> rank_sets(const Matrix& rows, std::size_t m, bool by_abs) {
    std::vector<RankSet> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        out.push_back(rank_set({rows.data() + r * rows.cols(), static_cast<std::size_t>(rows.cols())}, m, by_abs));
    }
    return out;
}

}  // namespace dna
