#include "dna/encoder.hpp"

#include "dna/error.hpp"
#include "dna/rng.hpp"

#include <cmath>

namespace dna {

namespace {

Dense xavier_dense(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Dense d;
    d.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    d.bias = Vector::Zero(static_cast<Eigen::Index>(fan_out));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = rng.uniform(-limit, limit);
    return d;
}

Dense zeros_like(const Dense& d) {
    return Dense{Matrix::Zero(d.weight.rows(), d.weight.cols()), Vector::Zero(d.bias.size())};
}

bool same_shape(const Dense& a, const Dense& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.bias.size() == b.bias.size();
}

void check_batch(const ParameterSet& params, const Matrix& batch) {
    if (batch.rows() > 0 && static_cast<std::size_t>(batch.cols()) != params.input_dim()) {
        throw StructuralError("batch has " + std::to_string(batch.cols()) + " columns, encoder expects " +
                              std::to_string(params.input_dim()));
    }
    if (!batch.allFinite()) throw NumericError("non-finite value in encoder input batch");
}

// Pairs every tensor of `a` with the matching tensor of `b`.
template <class F>
void zip_tensors(ParameterSet& a, const ParameterSet& b, F&& fn) {
    std::vector<const double*> src;
    b.for_each_tensor([&](const double* p, std::size_t) { src.push_back(p); });
    std::size_t t = 0;
    a.for_each_tensor([&](double* p, std::size_t n) {
        fn(p, src[t], n);
        ++t;
    });
}

}  // namespace

std::size_t ParameterSet::input_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows());
}

std::size_t ParameterSet::embed_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.cols());
}

std::size_t ParameterSet::num_classes() const { return static_cast<std::size_t>(classifier.weight.cols()); }

std::size_t ParameterSet::num_scalars() const {
    std::size_t n = 0;
    for_each_tensor([&](const double*, std::size_t k) { n += k; });
    return n;
}

void ParameterSet::validate() const {
    if (layers.empty()) throw StructuralError("encoder has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].bias.size() != layers[i].weight.cols()) {
            throw StructuralError("layer " + std::to_string(i) + " bias does not match its weight columns");
        }
        if (i > 0 && layers[i].weight.rows() != layers[i - 1].weight.cols()) {
            throw StructuralError("layer " + std::to_string(i) + " input does not match layer " +
                                  std::to_string(i - 1) + " output");
        }
    }
    if (classifier.weight.rows() != layers.back().weight.cols()) {
        throw StructuralError("classifier input does not match the embedding dimension");
    }
    if (classifier.bias.size() != classifier.weight.cols()) {
        throw StructuralError("classifier bias does not match its weight columns");
    }
}

bool ParameterSet::same_shape(const ParameterSet& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (!dna::same_shape(layers[i], other.layers[i])) return false;
    return dna::same_shape(classifier, other.classifier);
}

bool ParameterSet::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) ok = ok && std::isfinite(p[i]);
    });
    return ok;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet z;
    for (const auto& l : layers) z.layers.push_back(dna::zeros_like(l));
    z.classifier = dna::zeros_like(classifier);
    return z;
}

ParameterSet init_parameters(const EncoderShape& shape, std::uint64_t seed) {
    if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.embed_dim == 0 || shape.num_classes == 0) {
        throw StructuralError("encoder dimensions must be positive");
    }
    Rng rng(seed);
    ParameterSet p;
    p.layers.push_back(xavier_dense(shape.input_dim, shape.hidden_dim, rng));
    p.layers.push_back(xavier_dense(shape.hidden_dim, shape.embed_dim, rng));
    p.classifier = xavier_dense(shape.embed_dim, shape.num_classes, rng);
    return p;
}

ForwardTrace forward_trace(const ParameterSet& params, const Matrix& batch) {
    check_batch(params, batch);
    ForwardTrace tr;
    tr.input = batch;
    const Matrix* prev = &tr.input;
    tr.activations.reserve(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const Dense& l = params.layers[i];
        Matrix z = (*prev) * l.weight;
        z.rowwise() += l.bias.transpose();
        if (i + 1 < params.layers.size()) z = z.array().tanh().matrix();
        if (!z.allFinite()) throw NumericError("non-finite activation in encoder layer " + std::to_string(i));
        tr.activations.push_back(std::move(z));
        prev = &tr.activations.back();
    }
    tr.out.hidden = tr.activations.back();
    tr.norms = tr.out.hidden.rowwise().norm();
    for (Eigen::Index r = 0; r < tr.norms.size(); ++r) {
        if (tr.norms(r) < kMinEmbeddingNorm) {
            throw NumericError("encoder output row " + std::to_string(r) + " has norm below 1e-12; cannot normalize");
        }
    }
    tr.out.embedding = tr.out.hidden.array().colwise() / tr.norms.array();
    return tr;
}

EncoderOutput forward(const ParameterSet& params, const Matrix& batch) {
    return std::move(forward_trace(params, batch).out);
}

Matrix classify(const ParameterSet& params, const Matrix& features) {
    if (features.rows() > 0 && features.cols() != params.classifier.weight.rows()) {
        throw StructuralError("classifier expects " + std::to_string(params.classifier.weight.rows()) +
                              " features, got " + std::to_string(features.cols()));
    }
    Matrix logits = features * params.classifier.weight;
    logits.rowwise() += params.classifier.bias.transpose();
    return logits;
}

ParameterSet backward(const ParameterSet& params, const ForwardTrace& trace, const Matrix& grad_embedding,
                      const Matrix& grad_logits, bool classifier_on_embedding) {
    const Eigen::Index batch = trace.out.hidden.rows();
    const Eigen::Index dim = trace.out.hidden.cols();
    ParameterSet grads = params.zeros_like();

    Matrix g_emb = Matrix::Zero(batch, dim);
    if (grad_embedding.rows() > 0) {
        if (grad_embedding.rows() != batch || grad_embedding.cols() != dim) {
            throw StructuralError("embedding gradient shape does not match the forward batch");
        }
        g_emb = grad_embedding;
    }
    Matrix g_hidden = Matrix::Zero(batch, dim);

    if (grad_logits.rows() > 0) {
        if (grad_logits.rows() != batch || grad_logits.cols() != params.classifier.weight.cols()) {
            throw StructuralError("logit gradient shape does not match the forward batch");
        }
        const Matrix& features = classifier_on_embedding ? trace.out.embedding : trace.out.hidden;
        grads.classifier.weight = features.transpose() * grad_logits;
        grads.classifier.bias = grad_logits.colwise().sum().transpose();
        const Matrix g_feat = grad_logits * params.classifier.weight.transpose();
        if (classifier_on_embedding) {
            g_emb += g_feat;
        } else {
            g_hidden += g_feat;
        }
    }

    // d(h/|h|)/dh applied row-wise: (g - e (e.g)) / |h|
    const Vector proj = (trace.out.embedding.array() * g_emb.array()).rowwise().sum();
    Matrix g_norm = g_emb.array() - trace.out.embedding.array().colwise() * proj.array();
    g_norm = g_norm.array().colwise() / trace.norms.array();
    g_hidden += g_norm;

    Matrix g_act = std::move(g_hidden);
    for (std::size_t i = params.layers.size(); i-- > 0;) {
        Matrix g_z = std::move(g_act);
        if (i + 1 < params.layers.size()) {
            g_z = (g_z.array() * (1.0 - trace.activations[i].array().square())).matrix();
        }
        const Matrix& below = i == 0 ? trace.input : trace.activations[i - 1];
        grads.layers[i].weight = below.transpose() * g_z;
        grads.layers[i].bias = g_z.colwise().sum().transpose();
        if (i > 0) g_act = g_z * params.layers[i].weight.transpose();
    }
    return grads;
}

void momentum_update(ParameterSet& momentum, const ParameterSet& query, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("momentum alpha must lie in [0, 1)");
    if (!momentum.same_shape(query)) throw StructuralError("momentum and query encoders differ in shape");
    const double beta = 1.0 - alpha;
    zip_tensors(momentum, query, [&](double* pm, const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) pm[i] = alpha * pm[i] + beta * p[i];
    });
}

double global_norm(const ParameterSet& grads) {
    double sq = 0.0;
    grads.for_each_tensor([&](const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) sq += p[i] * p[i];
    });
    return std::sqrt(sq);
}

double clip_scale(double grad_norm, double grad_clip) {
    if (grad_clip <= 0.0 || grad_norm <= grad_clip) return 1.0;
    return grad_clip / grad_norm;
}

StepInfo apply_gradients(ParameterSet& params, AdamState& state, const ParameterSet& grads,
                         const OptimizerSettings& opt) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
        throw StructuralError("gradient or optimizer state shape does not match parameters");
    }
    if (!grads.all_finite()) throw NumericError("non-finite gradient; parameters left unchanged");

    StepInfo info;
    info.grad_norm = global_norm(grads);
    info.clip_scale = clip_scale(info.grad_norm, opt.grad_clip);

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);

    std::vector<double*> m_ptrs, v_ptrs;
    std::vector<const double*> g_ptrs;
    state.m.for_each_tensor([&](double* p, std::size_t) { m_ptrs.push_back(p); });
    state.v.for_each_tensor([&](double* p, std::size_t) { v_ptrs.push_back(p); });
    grads.for_each_tensor([&](const double* p, std::size_t) { g_ptrs.push_back(p); });

    std::size_t t_idx = 0;
    params.for_each_tensor([&](double* w, std::size_t n) {
        double* m = m_ptrs[t_idx];
        double* v = v_ptrs[t_idx];
        const double* g = g_ptrs[t_idx];
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i] * info.clip_scale;
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
            const double step = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt.eps);
            w[i] -= opt.lr * (step + opt.weight_decay * w[i]);
        }
        ++t_idx;
    });
    return info;
}

}  // namespace dna
