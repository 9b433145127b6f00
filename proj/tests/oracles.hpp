#pragma once

// Independent reference implementations used only by tests. They follow the
// textbook definitions directly and share no code with the library paths
// they check.

#include "dna/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

// Accuracy maximized over every injective relabeling of predicted clusters.
inline double brute_force_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::vector<int> p_labels(pred.begin(), pred.end());
    std::sort(p_labels.begin(), p_labels.end());
    p_labels.erase(std::unique(p_labels.begin(), p_labels.end()), p_labels.end());
    std::vector<int> t_labels(truth.begin(), truth.end());
    std::sort(t_labels.begin(), t_labels.end());
    t_labels.erase(std::unique(t_labels.begin(), t_labels.end()), t_labels.end());
    // Pad the target side with sentinels so every predicted cluster has an image.
    while (t_labels.size() < p_labels.size()) t_labels.push_back(-1000 - static_cast<int>(t_labels.size()));

    std::vector<std::size_t> perm(t_labels.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t best = 0;
    do {
        std::map<int, int> mapping;
        for (std::size_t i = 0; i < p_labels.size(); ++i) mapping[p_labels[i]] = t_labels[perm[i]];
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hits += mapping[pred[i]] == truth[i] ? 1 : 0;
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

// Rand-index terms by enumerating all unordered sample pairs.
inline double pair_counting_ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    const std::size_t n = pred.size();
    double both = 0, same_pred = 0, same_truth = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sp = pred[i] == pred[j];
            const bool st = truth[i] == truth[j];
            both += (sp && st) ? 1 : 0;
            same_pred += sp ? 1 : 0;
            same_truth += st ? 1 : 0;
            pairs += 1;
        }
    }
    if (pairs == 0) return 1.0;
    const double expected = same_pred * same_truth / pairs;
    const double max_index = 0.5 * (same_pred + same_truth);
    if (max_index == expected) return 1.0;
    return (both - expected) / (max_index - expected);
}

// Mutual information and entropies from an explicit joint distribution.
inline double joint_count_nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    const double n = static_cast<double>(pred.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        joint[{pred[i], truth[i]}] += 1.0 / n;
        pa[pred[i]] += 1.0 / n;
        pb[truth[i]] += 1.0 / n;
    }
    double mi = 0, ha = 0, hb = 0;
    for (const auto& [ab, p] : joint) mi += p * std::log(p / (pa[ab.first] * pb[ab.second]));
    for (const auto& [a, p] : pa) ha -= p * std::log(p);
    for (const auto& [b, p] : pb) hb -= p * std::log(p);
    if (pa.size() == 1 && pb.size() == 1) return 1.0;
    return 2 * mi / (ha + hb);
}

// Full sort of all similarities with the same tie-break rule.
inline std::vector<std::size_t> full_sort_topk(const dna::Matrix& keys, std::optional<std::size_t> self,
                                               const dna::Vector& q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (Eigen::Index j = 0; j < keys.rows(); ++j) {
        if (self && static_cast<std::size_t>(j) == *self) continue;
        double dot = 0;
        for (Eigen::Index d = 0; d < keys.cols(); ++d) dot += keys(j, d) * q(d);
        all.push_back({dot, static_cast<std::size_t>(j)});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
    return out;
}

// Central finite difference of f at x along every coordinate.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f(x);
        x[i] = orig - h;
        const double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
