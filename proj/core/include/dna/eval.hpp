#pragma once

#include "dna/encoder.hpp"
#include "dna/synthdata.hpp"
#include "dna/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dna {

struct Partition {
    std::vector<int> assignments;
    std::size_t num_clusters = 0;
};

struct KMeansSettings {
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    double tolerance = 1e-6;  // largest centroid displacement that counts as converged
};

/// k-means++ seeding followed by Lloyd iterations; the restart with the lowest
/// inertia wins (ties go to the earliest restart). Throws StructuralError when
/// there are fewer rows than clusters.
Partition kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansSettings& settings = {});

/// Maximum-weight perfect assignment on a square matrix, O(n^3).
/// Returns col_of_row.
std::vector<std::size_t> max_weight_assignment(const Matrix& weight);

/// Fraction of samples correctly labeled under the best one-to-one mapping of
/// predicted clusters onto true classes.
double hungarian_acc(std::span<const int> pred, std::span<const int> truth);

double ari(std::span<const int> pred, std::span<const int> truth);

/// 2 I(pred; truth) / (H(pred) + H(truth)), natural log. Both partitions
/// trivial gives 1.
double nmi(std::span<const int> pred, std::span<const int> truth);

/// Micro-averaged fraction of (query, neighbor) pairs sharing a fine label.
/// `sets[i]` indexes into `key_fine`; query i has label `query_fine[i]`.
/// Throws StructuralError when labels are unknown or there are no pairs.
double neighbor_accuracy(const std::vector<IndexList>& sets, std::span<const int> query_fine,
                         std::span<const int> key_fine);

struct EvalReport {
    double acc = 0.0;
    double ari = 0.0;
    double nmi = 0.0;
    std::optional<double> neighbor_acc;
    std::size_t k = 0;
    std::uint64_t seed = 0;
};

/// Clusters embeddings into `k` groups and scores them against `fine`.
EvalReport evaluate_embeddings(const Matrix& embeddings, std::span<const int> fine, std::size_t k,
                               std::uint64_t seed, const KMeansSettings& settings = {});

/// Holds the fine labels of a dataset. The trainer receives this as an opaque
/// scoring service: it can ask for scores but never sees the labels.
class Evaluator {
public:
    Evaluator(const Dataset& ds, std::uint64_t seed, KMeansSettings settings = {});

    /// ACC/ARI/NMI of the query encoder's normalized test-split embeddings.
    EvalReport evaluate(const ParameterSet& params) const;

    /// Accuracy of training-split neighbor sets; nullopt when no pairs exist.
    std::optional<double> neighbor_accuracy(const std::vector<IndexList>& sets) const;

    bool has_train_fine_labels() const { return train_fine_ok_; }

private:
    const Dataset* ds_;
    std::uint64_t seed_;
    KMeansSettings settings_;
    bool train_fine_ok_;
};

}  // namespace dna
