#include "dna/eval.hpp"

#include "dna/error.hpp"
#include "dna/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dna {

namespace {

void check_lengths(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) {
        throw StructuralError("partition lengths differ: " + std::to_string(pred.size()) + " vs " +
                              std::to_string(truth.size()));
    }
}

// Maps arbitrary labels onto 0..n-1 in order of first appearance.
std::vector<std::size_t> densify(std::span<const int> labels, std::size_t& count) {
    std::map<int, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (int l : labels) {
        const auto [it, inserted] = ids.emplace(l, ids.size());
        out.push_back(it->second);
    }
    count = ids.size();
    return out;
}

struct Contingency {
    std::size_t rows = 0, cols = 0, total = 0;
    std::vector<std::size_t> cells, row_sums, col_sums;

    std::size_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
    check_lengths(pred, truth);
    Contingency t;
    const auto p = densify(pred, t.rows);
    const auto y = densify(truth, t.cols);
    t.total = pred.size();
    t.cells.assign(t.rows * t.cols, 0);
    t.row_sums.assign(t.rows, 0);
    t.col_sums.assign(t.cols, 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        ++t.cells[p[i] * t.cols + y[i]];
        ++t.row_sums[p[i]];
        ++t.col_sums[y[i]];
    }
    return t;
}

double comb2(std::size_t n) { return n < 2 ? 0.0 : static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; }

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

struct LloydResult {
    std::vector<int> assign;
    double inertia = 0.0;
};

double assign_points(const Matrix& x, const Matrix& centers, std::vector<int>& assign) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = sq_dist(x, i, centers, c);
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        assign[static_cast<std::size_t>(i)] = arg;
        inertia += best;
    }
    return inertia;
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(x.rows());
    Matrix centers(static_cast<Eigen::Index>(k), x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(n)));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x, static_cast<Eigen::Index>(i), centers, 0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(x, static_cast<Eigen::Index>(i), centers, static_cast<Eigen::Index>(c)));
        }
    }
    return centers;
}

LloydResult lloyd(const Matrix& x, Matrix centers, const KMeansSettings& settings) {
    const auto k = centers.rows();
    LloydResult res;
    res.assign.assign(static_cast<std::size_t>(x.rows()), 0);
    for (std::size_t it = 0; it < settings.max_iterations; ++it) {
        assign_points(x, centers, res.assign);
        Matrix sums = Matrix::Zero(k, x.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const int c = res.assign[static_cast<std::size_t>(i)];
            sums.row(c) += x.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        double shift = 0.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;  // empty cluster keeps its center
            const RowVector next = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            shift = std::max(shift, (next - centers.row(c)).norm());
            centers.row(c) = next;
        }
        if (shift < settings.tolerance) break;
    }
    res.inertia = assign_points(x, centers, res.assign);
    return res;
}

}  // namespace

Partition kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansSettings& settings) {
    if (k == 0) throw StructuralError("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(x.rows()) < k) {
        throw StructuralError("kmeans: " + std::to_string(x.rows()) + " samples cannot form " + std::to_string(k) +
                              " clusters");
    }
    Rng rng(seed);
    LloydResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    const std::size_t restarts = std::max<std::size_t>(1, settings.restarts);
    for (std::size_t r = 0; r < restarts; ++r) {
        LloydResult cur = lloyd(x, kmeanspp_seed(x, k, rng), settings);
        if (cur.inertia < best.inertia) best = std::move(cur);
    }
    return Partition{std::move(best.assign), k};
}

std::vector<std::size_t> max_weight_assignment(const Matrix& weight) {
    if (weight.rows() != weight.cols()) throw StructuralError("assignment needs a square matrix");
    const auto n = static_cast<std::size_t>(weight.rows());
    if (n == 0) return {};
    const double top = weight.maxCoeff();
    // Shortest augmenting path with potentials on cost = top - weight (1-based).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = row_of_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cost = top - weight(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1));
                const double cur = cost - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of_row(n, 0);
    for (std::size_t j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

double hungarian_acc(std::span<const int> pred, std::span<const int> truth) {
    const Contingency t = contingency(pred, truth);
    if (t.total == 0) throw StructuralError("hungarian_acc: empty partitions");
    const std::size_t n = std::max(t.rows, t.cols);
    Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c)
            w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(t.at(r, c));
    const auto match = max_weight_assignment(w);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < t.rows; ++r)
        if (match[r] < t.cols) hits += t.at(r, match[r]);
    return static_cast<double>(hits) / static_cast<double>(t.total);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
    const Contingency t = contingency(pred, truth);
    double index = 0.0;
    for (std::size_t c : t.cells) index += comb2(c);
    double sum_rows = 0.0, sum_cols = 0.0;
    for (std::size_t a : t.row_sums) sum_rows += comb2(a);
    for (std::size_t b : t.col_sums) sum_cols += comb2(b);
    const double pairs = comb2(t.total);
    if (pairs == 0.0) return 1.0;
    const double expected = sum_rows * sum_cols / pairs;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
    const Contingency t = contingency(pred, truth);
    if (t.total == 0) throw StructuralError("nmi: empty partitions");
    const double n = static_cast<double>(t.total);
    const auto entropy = [n](const std::vector<std::size_t>& sums) {
        double h = 0.0;
        for (std::size_t s : sums)
            if (s > 0) h -= (static_cast<double>(s) / n) * std::log(static_cast<double>(s) / n);
        return h;
    };
    const double h_pred = entropy(t.row_sums);
    const double h_truth = entropy(t.col_sums);
    if (h_pred == 0.0 && h_truth == 0.0) return 1.0;
    double mi = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols; ++c) {
            const std::size_t nij = t.at(r, c);
            if (nij == 0) continue;
            const double pij = static_cast<double>(nij) / n;
            mi += pij * std::log(static_cast<double>(nij) * n /
                                 (static_cast<double>(t.row_sums[r]) * static_cast<double>(t.col_sums[c])));
        }
    }
    return std::clamp(2.0 * mi / (h_pred + h_truth), 0.0, 1.0);
}

double neighbor_accuracy(const std::vector<IndexList>& sets, std::span<const int> query_fine,
                         std::span<const int> key_fine) {
    if (query_fine.size() != sets.size()) throw StructuralError("neighbor_accuracy: one label per query required");
    const auto unknown = [](int f) { return f == kUnknownFine; };
    if (std::any_of(query_fine.begin(), query_fine.end(), unknown) ||
        std::any_of(key_fine.begin(), key_fine.end(), unknown)) {
        throw StructuralError("neighbor_accuracy: fine labels are unavailable");
    }
    std::size_t pairs = 0, hits = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (Index j : sets[i]) {
            if (j >= key_fine.size()) throw StructuralError("neighbor_accuracy: neighbor index out of range");
            ++pairs;
            hits += key_fine[j] == query_fine[i] ? 1 : 0;
        }
    }
    if (pairs == 0) throw StructuralError("neighbor_accuracy: undefined when every neighbor set is empty");
    return static_cast<double>(hits) / static_cast<double>(pairs);
}

EvalReport evaluate_embeddings(const Matrix& embeddings, std::span<const int> fine, std::size_t k,
                               std::uint64_t seed, const KMeansSettings& settings) {
    if (static_cast<std::size_t>(embeddings.rows()) != fine.size()) {
        throw StructuralError("evaluate: embeddings and labels differ in count");
    }
    if (std::any_of(fine.begin(), fine.end(), [](int f) { return f == kUnknownFine; })) {
        throw StructuralError("evaluate: fine labels are required for ACC/ARI/NMI");
    }
    const Partition p = kmeans(embeddings, k, seed, settings);
    EvalReport r;
    r.acc = hungarian_acc(p.assignments, fine);
    r.ari = ari(p.assignments, fine);
    r.nmi = nmi(p.assignments, fine);
    r.k = k;
    r.seed = seed;
    return r;
}

Evaluator::Evaluator(const Dataset& ds, std::uint64_t seed, KMeansSettings settings)
    : ds_(&ds), seed_(seed), settings_(settings), train_fine_ok_(ds.train.has_fine_labels()) {}

EvalReport Evaluator::evaluate(const ParameterSet& params) const {
    if (ds_->test.size() == 0) throw StructuralError("evaluate: the test split is empty");
    const auto out = forward(params, ds_->test.x);
    return evaluate_embeddings(out.embedding, ds_->test.fine, ds_->num_fine, seed_, settings_);
}

std::optional<double> Evaluator::neighbor_accuracy(const std::vector<IndexList>& sets) const {
    if (!train_fine_ok_) return std::nullopt;
    const bool any = std::any_of(sets.begin(), sets.end(), [](const IndexList& l) { return !l.empty(); });
    if (!any) return std::nullopt;
    return dna::neighbor_accuracy(sets, ds_->train.fine, ds_->train.fine);
}

}  // namespace dna
