#include "dna/membank.hpp"

#include "dna/error.hpp"
#include "dna/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dna {

namespace {

void check_unit_rows(const Matrix& m, const char* what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double n = m.row(r).norm();
        if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitNormTolerance) {
            throw NumericError(std::string(what) + " row " + std::to_string(r) + " is not unit-norm (norm " +
                               std::to_string(n) + ")");
        }
    }
}

}  // namespace

FeatureBank::FeatureBank(Matrix keys, std::vector<int> coarse_labels)
    : keys_(std::move(keys)), coarse_(std::move(coarse_labels)) {
    if (static_cast<std::size_t>(keys_.rows()) != coarse_.size()) {
        throw StructuralError("bank keys and coarse labels differ in length");
    }
    check_unit_rows(keys_, "bank key");
}

void FeatureBank::update(std::span<const Index> ids, const Matrix& new_keys) {
    if (static_cast<std::size_t>(new_keys.rows()) != ids.size() || (new_keys.rows() > 0 && new_keys.cols() != keys_.cols())) {
        throw StructuralError("bank update: new keys shape does not match ids / bank dimension");
    }
    for (Index id : ids) {
        if (id >= size()) {
            throw StructuralError("bank update: id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
        }
    }
    check_unit_rows(new_keys, "bank update");
    for (std::size_t r = 0; r < ids.size(); ++r) {
        keys_.row(static_cast<Eigen::Index>(ids[r])) = new_keys.row(static_cast<Eigen::Index>(r));
    }
    ++version_;
}

void FeatureBank::refresh_rank_sets(std::size_t m, bool by_abs) {
    if (rank_sets_current() && rank_m_ == m && rank_by_abs_ == by_abs) return;
    rank_cache_ = dna::rank_sets(keys_, m, by_abs);
    rank_version_ = version_;
    rank_m_ = m;
    rank_by_abs_ = by_abs;
}

const std::vector<RankSet>& FeatureBank::rank_sets() const {
    if (rank_version_ != version_) throw StructuralError("bank rank sets are stale; call refresh_rank_sets first");
    return rank_cache_;
}

FeatureBank init_bank(const CoarseView& train, const ParameterSet& momentum) {
    auto out = forward(momentum, train.x());
    return FeatureBank(std::move(out.embedding), std::vector<int>(train.coarse().begin(), train.coarse().end()));
}

double cosine_sim(std::span<const double> q, std::span<const double> h) {
    if (q.size() != h.size()) throw StructuralError("cosine_sim: vectors differ in length");
    double dot = 0.0, nq = 0.0, nh = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        dot += q[i] * h[i];
        nq += q[i] * q[i];
        nh += h[i] * h[i];
    }
    if (nq == 0.0 || nh == 0.0) throw NumericError("cosine_sim: zero vector");
    return std::clamp(dot / (std::sqrt(nq) * std::sqrt(nh)), -1.0, 1.0);
}

IndexList topk_neighbors(const Matrix& keys, std::optional<Index> self, std::span<const double> q, std::size_t k,
                         bool* clamped) {
    if (k == 0) throw StructuralError("topk_neighbors: k must be >= 1");
    if (keys.rows() == 0) throw StructuralError("topk_neighbors: empty bank");
    if (static_cast<std::size_t>(keys.cols()) != q.size()) {
        throw StructuralError("topk_neighbors: query dimension does not match bank");
    }
    const auto n = static_cast<std::size_t>(keys.rows());
    const bool excludes = self.has_value() && *self < n;
    const std::size_t candidates = n - (excludes ? 1 : 0);
    const std::size_t take = std::min(k, candidates);
    if (take < k) {
        if (clamped != nullptr) {
            *clamped = true;
        } else {
            log::warn("k=" + std::to_string(k) + " exceeds the " + std::to_string(candidates) +
                      " retrievable bank rows; clamped");
        }
    }

    const Eigen::Map<const Vector> qv(q.data(), static_cast<Eigen::Index>(q.size()));
    const Vector sims = keys * qv;

    IndexList order;
    order.reserve(candidates);
    for (Index j = 0; j < n; ++j)
        if (!excludes || j != *self) order.push_back(j);

    const auto better = [&](Index a, Index b) {
        const double sa = sims(static_cast<Eigen::Index>(a));
        const double sb = sims(static_cast<Eigen::Index>(b));
        return sa > sb || (sa == sb && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    order.resize(take);
    return order;
}

IndexList topk_neighbors(const FeatureBank& bank, std::optional<Index> self, std::span<const double> q,
                         std::size_t k, bool* clamped) {
    return topk_neighbors(bank.keys(), self, q, k, clamped);
}

}  // namespace dna
