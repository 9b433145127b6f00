#pragma once

#include "dna/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dna {

/// Affine layer y = x * weight + bias, weight stored fan_in x fan_out.
struct Dense {
    Matrix weight;
    Vector bias;

    friend bool operator==(const Dense& a, const Dense& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
               a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
    }
};

struct EncoderShape {
    std::size_t input_dim = 32;
    std::size_t hidden_dim = 128;
    std::size_t embed_dim = 16;
    std::size_t num_classes = 10;
};

/// Weights of an MLP encoder (tanh between layers, linear output) plus the
/// coarse classifier head. The query encoder and the momentum encoder are two
/// instances of this type.
struct ParameterSet {
    std::vector<Dense> layers;
    Dense classifier;

    std::size_t input_dim() const;
    std::size_t embed_dim() const;
    std::size_t num_classes() const;
    std::size_t num_scalars() const;

    // Throws StructuralError when consecutive shapes do not chain.
    void validate() const;
    bool same_shape(const ParameterSet& other) const;
    bool all_finite() const;

    ParameterSet zeros_like() const;

    // Visits every tensor (weights and biases, layers then classifier) in a
    // fixed order as a flat span of scalars.
    template <class F>
    void for_each_tensor(F&& fn);
    template <class F>
    void for_each_tensor(F&& fn) const;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

/// Xavier-uniform weights, zero biases.
ParameterSet init_parameters(const EncoderShape& shape, std::uint64_t seed);

struct EncoderOutput {
    Matrix hidden;     // encoder output before normalization
    Matrix embedding;  // row-wise L2-normalized hidden
};

/// Intermediate values retained for backpropagation.
struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> activations;  // output of every layer, after its nonlinearity
    Vector norms;                     // row norms of the final layer output
    EncoderOutput out;
};

inline constexpr double kMinEmbeddingNorm = 1e-12;

EncoderOutput forward(const ParameterSet& params, const Matrix& batch);
ForwardTrace forward_trace(const ParameterSet& params, const Matrix& batch);

Matrix classify(const ParameterSet& params, const Matrix& features);

/// Parameter gradients from upstream gradients at the normalized embedding
/// and at the classifier logits. An empty (0-row) matrix means "no gradient
/// from that head". `classifier_on_embedding` selects which representation
/// the classifier consumed in the forward pass.
ParameterSet backward(const ParameterSet& params, const ForwardTrace& trace, const Matrix& grad_embedding,
                      const Matrix& grad_logits, bool classifier_on_embedding = false);

/// theta_m <- alpha * theta_m + (1 - alpha) * theta, elementwise.
void momentum_update(ParameterSet& momentum, const ParameterSet& query, double alpha);

struct OptimizerSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;  // global-norm threshold; 0 disables clipping
};

struct AdamState {
    ParameterSet m;
    ParameterSet v;
    std::uint64_t step = 0;

    static AdamState for_params(const ParameterSet& params) {
        return AdamState{params.zeros_like(), params.zeros_like(), 0};
    }
};

struct StepInfo {
    double grad_norm = 0.0;  // before clipping
    double clip_scale = 1.0;
};

double global_norm(const ParameterSet& grads);
double clip_scale(double grad_norm, double grad_clip);

/// Global-norm clipping followed by an Adam moment update with decoupled
/// weight decay. Throws NumericError, leaving params and state untouched,
/// when any gradient is non-finite.
StepInfo apply_gradients(ParameterSet& params, AdamState& state, const ParameterSet& grads,
                         const OptimizerSettings& opt);

// ----- template definitions -----

template <class F>
void ParameterSet::for_each_tensor(F&& fn) {
    for (auto& l : layers) {
        fn(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        fn(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    fn(classifier.weight.data(), static_cast<std::size_t>(classifier.weight.size()));
    fn(classifier.bias.data(), static_cast<std::size_t>(classifier.bias.size()));
}

template <class F>
void ParameterSet::for_each_tensor(F&& fn) const {
    for (const auto& l : layers) {
        fn(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        fn(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    fn(classifier.weight.data(), static_cast<std::size_t>(classifier.weight.size()));
    fn(classifier.bias.data(), static_cast<std::size_t>(classifier.bias.size()));
}

}  // namespace dna
