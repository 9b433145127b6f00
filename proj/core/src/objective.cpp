#include "dna/objective.hpp"

#include "dna/error.hpp"

#include <cmath>

namespace dna {

namespace {

void check_inputs(const Matrix& queries, const std::vector<IndexList>& positives, const Matrix& bank_keys, double tau) {
    if (bank_keys.rows() == 0) throw StructuralError("contrastive loss needs a nonempty bank");
    if (!(tau > 0.0)) throw ConfigError("temperature tau must be > 0");
    if (static_cast<std::size_t>(queries.rows()) != positives.size()) {
        throw StructuralError("one positive set is required per query");
    }
    if (queries.rows() > 0 && queries.cols() != bank_keys.cols()) {
        throw StructuralError("query and bank dimensions differ");
    }
    for (const auto& s : positives)
        for (Index j : s)
            if (j >= static_cast<std::size_t>(bank_keys.rows())) {
                throw StructuralError("positive key index " + std::to_string(j) + " outside the bank");
            }
}

// Per-row log-sum-exp of logits with max subtraction.
Vector row_logsumexp(const Matrix& logits) {
    Vector out(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        out(r) = mx + std::log((logits.row(r).array() - mx).exp().sum());
    }
    return out;
}

}  // namespace

Matrix bank_softmax(const Matrix& queries, const Matrix& bank_keys, double tau) {
    Matrix logits = (queries * bank_keys.transpose()) / tau;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - mx).exp();
        logits.row(r) /= logits.row(r).sum();
    }
    return logits;
}

DnaLoss dna_loss(const Matrix& queries, const std::vector<IndexList>& positives, const Matrix& bank_keys, double tau) {
    check_inputs(queries, positives, bank_keys, tau);
    const Eigen::Index batch = queries.rows();
    DnaLoss out;
    out.grad = Matrix::Zero(batch, queries.cols());
    for (const auto& s : positives) (s.empty() ? out.skipped : out.active) += 1;
    if (out.active == 0) return out;

    const Matrix logits = (queries * bank_keys.transpose()) / tau;
    const Vector lse = row_logsumexp(logits);
    const double inv_active = 1.0 / static_cast<double>(out.active);

    double loss = 0.0, align = 0.0, unif = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const auto& s = positives[static_cast<std::size_t>(i)];
        if (s.empty()) continue;
        const double inv_s = 1.0 / static_cast<double>(s.size());
        double nll = 0.0, pos = 0.0;
        RowVector pos_mean = RowVector::Zero(bank_keys.cols());
        for (Index j : s) {
            const double lj = logits(i, static_cast<Eigen::Index>(j));
            nll -= lj - lse(i);
            pos += lj;
            pos_mean += bank_keys.row(static_cast<Eigen::Index>(j));
        }
        loss += inv_s * nll;
        align -= inv_s * pos;
        unif += lse(i);

        const RowVector p = (logits.row(i).array() - lse(i)).exp().matrix();
        out.grad.row(i) = (p * bank_keys - inv_s * pos_mean) * (inv_active / tau);
    }
    out.loss = loss * inv_active;
    out.alignment = align * inv_active;
    out.uniformity = unif * inv_active;
    return out;
}

AlignmentUniformity alignment_uniformity(const Matrix& queries, const std::vector<IndexList>& positives,
                                         const Matrix& bank_keys, double tau) {
    check_inputs(queries, positives, bank_keys, tau);
    AlignmentUniformity au;
    std::size_t active = 0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const auto& s = positives[static_cast<std::size_t>(i)];
        if (s.empty()) continue;
        ++active;
        double dots = 0.0;
        for (Index j : s) dots += queries.row(i).dot(bank_keys.row(static_cast<Eigen::Index>(j))) / tau;
        au.alignment -= dots / static_cast<double>(s.size());

        const Vector sims = bank_keys * queries.row(i).transpose() / tau;
        const double mx = sims.maxCoeff();
        au.uniformity += mx + std::log((sims.array() - mx).exp().sum());
    }
    if (active > 0) {
        au.alignment /= static_cast<double>(active);
        au.uniformity /= static_cast<double>(active);
    }
    return au;
}

std::size_t Centroids::num_valid() const {
    std::size_t n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
}

Centroids neighbor_centroid(const std::vector<IndexList>& positives, const Matrix& bank_keys) {
    Centroids c;
    c.mu = Matrix::Zero(static_cast<Eigen::Index>(positives.size()), bank_keys.cols());
    c.valid.assign(positives.size(), false);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        const auto& s = positives[i];
        if (s.empty()) continue;
        for (Index j : s) {
            if (j >= static_cast<std::size_t>(bank_keys.rows())) throw StructuralError("centroid index outside the bank");
            c.mu.row(static_cast<Eigen::Index>(i)) += bank_keys.row(static_cast<Eigen::Index>(j));
        }
        c.mu.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(s.size());
        c.valid[i] = true;
    }
    return c;
}

double clustering_objective(const Matrix& queries, const Centroids& centroids) {
    if (queries.rows() != centroids.mu.rows()) throw StructuralError("queries and centroids differ in count");
    double total = 0.0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        if (!centroids.valid[static_cast<std::size_t>(i)]) continue;
        total += (queries.row(i) - centroids.mu.row(i)).squaredNorm();
    }
    return total;
}

double alignment_from_centroids(const Matrix& queries, const Centroids& centroids, double tau) {
    if (queries.rows() != centroids.mu.rows()) throw StructuralError("queries and centroids differ in count");
    const std::size_t active = centroids.num_valid();
    if (active == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        if (!centroids.valid[static_cast<std::size_t>(i)]) continue;
        total += (queries.row(i) - centroids.mu.row(i)).squaredNorm() - 1.0 - centroids.mu.row(i).squaredNorm();
    }
    return total / (2.0 * tau * static_cast<double>(active));
}

CrossEntropy ce_loss(const Matrix& logits, std::span<const int> labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
        throw StructuralError("ce_loss: one label is required per logit row");
    }
    CrossEntropy out;
    out.grad = Matrix::Zero(logits.rows(), logits.cols());
    if (logits.rows() == 0) return out;
    const auto classes = static_cast<int>(logits.cols());
    for (int y : labels) {
        if (y < 0 || y >= classes) {
            throw StructuralError("ce_loss: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
        }
    }
    const Vector lse = row_logsumexp(logits);
    const double inv_b = 1.0 / static_cast<double>(logits.rows());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        out.loss -= logits(r, y) - lse(r);
        out.grad.row(r) = (logits.row(r).array() - lse(r)).exp().matrix() * inv_b;
        out.grad(r, y) -= inv_b;
    }
    out.loss *= inv_b;
    return out;
}

}  // namespace dna
