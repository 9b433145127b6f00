#pragma once

#include "oracles.hpp"

#include "dna/encoder.hpp"
#include "dna/objective.hpp"
#include "dna/rng.hpp"
#include "dna/tensor.hpp"

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

inline dna::Matrix random_matrix(dna::Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    dna::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

inline dna::Matrix random_unit_rows(dna::Rng& rng, std::size_t rows, std::size_t cols) {
    dna::Matrix m = random_matrix(rng, rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
    return m;
}

// Random subset of [0, n) in random order, size in [lo, hi].
inline dna::IndexList random_subset(dna::Rng& rng, std::size_t n, std::size_t lo, std::size_t hi) {
    dna::IndexList all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rng.shuffle(all);
    const std::size_t size = std::min(n, lo + rng.below(hi - lo + 1));
    all.resize(size);
    return all;
}

inline std::vector<int> random_labels(dna::Rng& rng, std::size_t n, std::size_t k) {
    std::vector<int> out(n);
    for (auto& v : out) v = static_cast<int>(rng.below(k));
    return out;
}

inline std::vector<double> flatten(const dna::ParameterSet& p) {
    std::vector<double> out;
    p.for_each_tensor([&](const double* d, std::size_t n) { out.insert(out.end(), d, d + n); });
    return out;
}

inline dna::ParameterSet unflatten(const dna::ParameterSet& shape, const std::vector<double>& flat) {
    dna::ParameterSet p = shape;
    std::size_t pos = 0;
    p.for_each_tensor([&](double* d, std::size_t n) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.begin() + static_cast<std::ptrdiff_t>(pos + n), d);
        pos += n;
    });
    return p;
}

struct GradProblem {
    dna::ParameterSet params;
    dna::Matrix x;
    std::vector<dna::IndexList> positives;
    dna::Matrix bank;
    std::vector<int> labels;
    double tau = 0.5;
    double lambda_ce = 1.0;
    bool classify_normalized = false;
};

// DNA loss on the embeddings plus lambda * CE on the classifier logits.
inline double total_loss(const GradProblem& pr, const dna::ParameterSet& params) {
    const dna::EncoderOutput out = dna::forward(params, pr.x);
    double loss = dna::dna_loss(out.embedding, pr.positives, pr.bank, pr.tau).loss;
    if (pr.lambda_ce > 0) {
        const dna::Matrix logits =
            dna::classify(params, pr.classify_normalized ? out.embedding : out.hidden);
        loss += pr.lambda_ce * dna::ce_loss(logits, pr.labels).loss;
    }
    return loss;
}

inline std::vector<double> analytic_gradient(const GradProblem& pr) {
    const dna::ForwardTrace tr = dna::forward_trace(pr.params, pr.x);
    const dna::DnaLoss dl = dna::dna_loss(tr.out.embedding, pr.positives, pr.bank, pr.tau);
    dna::Matrix g_logits;
    if (pr.lambda_ce > 0) {
        const dna::Matrix logits =
            dna::classify(pr.params, pr.classify_normalized ? tr.out.embedding : tr.out.hidden);
        g_logits = dna::ce_loss(logits, pr.labels).grad * pr.lambda_ce;
    }
    const dna::Matrix g_emb = dl.active > 0 ? dl.grad : dna::Matrix();
    return flatten(dna::backward(pr.params, tr, g_emb, g_logits, pr.classify_normalized));
}

// A random small network and batch. Sizes are kept so the parameter count
// stays at or below `max_params`.
inline GradProblem random_grad_problem(std::uint64_t seed, std::size_t max_params = 200) {
    dna::Rng rng(seed);
    GradProblem pr;
    dna::EncoderShape shape;
    for (;;) {
        shape.input_dim = 2 + rng.below(7);
        shape.hidden_dim = 2 + rng.below(9);
        shape.embed_dim = 2 + rng.below(7);
        shape.num_classes = 2 + rng.below(4);
        const std::size_t count = shape.input_dim * shape.hidden_dim + shape.hidden_dim +
                                  shape.hidden_dim * shape.embed_dim + shape.embed_dim +
                                  shape.embed_dim * shape.num_classes + shape.num_classes;
        if (count <= max_params) break;
    }
    pr.params = dna::init_parameters(shape, seed ^ 0x5eedULL);
    // Nonzero biases so their gradients are exercised from a generic point.
    pr.params.for_each_tensor([&](double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] += 0.1 * rng.normal();
    });
    const std::size_t batch = 2 + rng.below(4);
    const std::size_t bank = 4 + rng.below(8);
    pr.x = random_matrix(rng, batch, shape.input_dim);
    pr.bank = random_unit_rows(rng, bank, shape.embed_dim);
    for (std::size_t i = 0; i < batch; ++i) pr.positives.push_back(random_subset(rng, bank, 0, 4));
    pr.labels = random_labels(rng, batch, shape.num_classes);
    pr.tau = 0.1 + rng.uniform();
    pr.lambda_ce = rng.below(3) == 0 ? 0.0 : 0.5 + rng.uniform();
    pr.classify_normalized = rng.below(4) == 0;
    return pr;
}

// Largest relative error between the analytic and the central-difference
// gradient over every parameter.
inline double gradient_check_error(const GradProblem& pr, double h = 1e-5) {
    const std::vector<double> analytic = analytic_gradient(pr);
    const std::vector<double> numeric = oracle::central_difference(
        [&](const std::vector<double>& flat) { return total_loss(pr, unflatten(pr.params, flat)); },
        flatten(pr.params), h);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i], 1e-6));
    }
    return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("dna_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
