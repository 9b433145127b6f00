#pragma once

#include "dna/tensor.hpp"

#include <span>
#include <vector>

namespace dna {

/// Loss decomposition for one batch (or an average over batches).
struct LossReport {
    double total = 0.0;
    double dna = 0.0;
    double alignment = 0.0;
    double uniformity = 0.0;
    double ce = 0.0;
    std::size_t skipped_queries = 0;
};

/// Multi-positive contrastive loss of unit-norm queries against a bank of
/// unit-norm keys:
///
///   L = -1/B' sum_i 1/|S_i| sum_{j in S_i} log( exp(q_i.h_j/tau) / sum_k exp(q_i.h_k/tau) )
///
/// where the sum over k runs over the whole bank and B' counts queries with a
/// nonempty positive set. Queries with an empty S_i contribute nothing and
/// are counted in `skipped`. The loss splits exactly into
///
///   alignment  = -1/B' sum_i 1/|S_i| sum_j q_i.h_j / tau
///   uniformity =  1/B' sum_i log sum_k exp(q_i.h_k / tau)
///
/// `grad` is dL/dq (bank keys are constants):
///   dL/dq_i = 1/(B' tau) * (sum_k p_ik h_k - mean_{j in S_i} h_j).
struct DnaLoss {
    double loss = 0.0;
    double alignment = 0.0;
    double uniformity = 0.0;
    std::size_t active = 0;
    std::size_t skipped = 0;
    Matrix grad;
};

DnaLoss dna_loss(const Matrix& queries, const std::vector<IndexList>& positives, const Matrix& bank_keys, double tau);

struct AlignmentUniformity {
    double alignment = 0.0;
    double uniformity = 0.0;
};

/// Evaluates the two terms directly, without going through the full loss.
AlignmentUniformity alignment_uniformity(const Matrix& queries, const std::vector<IndexList>& positives,
                                         const Matrix& bank_keys, double tau);

/// Row-wise softmax of q.h / tau over the bank, computed with max subtraction.
Matrix bank_softmax(const Matrix& queries, const Matrix& bank_keys, double tau);

/// Per-query mean of its positive keys. `valid[i]` is false when S_i is empty.
struct Centroids {
    Matrix mu;
    std::vector<bool> valid;

    std::size_t num_valid() const;
};

Centroids neighbor_centroid(const std::vector<IndexList>& positives, const Matrix& bank_keys);

/// sum over valid rows of |q_i - mu_i|^2.
double clustering_objective(const Matrix& queries, const Centroids& centroids);

/// The alignment term rewritten as a clustering loss for unit-norm queries:
///   1/(2 tau B') sum_i (|q_i - mu_i|^2 - 1 - |mu_i|^2)
double alignment_from_centroids(const Matrix& queries, const Centroids& centroids, double tau);

struct CrossEntropy {
    double loss = 0.0;
    Matrix grad;  // dL/dlogits = (softmax - onehot) / B
};

CrossEntropy ce_loss(const Matrix& logits, std::span<const int> labels);

}  // namespace dna
