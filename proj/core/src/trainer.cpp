#include "dna/trainer.hpp"

#include "dna/error.hpp"
#include "dna/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dna {

namespace {

// Sub-stream tags for mix_seed; fixed so runs stay reproducible.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPretrainStream = 2;
constexpr std::uint64_t kTrainStream = 3;

constexpr double kIdentityTolerance = 1e-9;

Matrix gather_rows(const Matrix& x, std::span<const Index> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const Index> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (Index r : rows) out.push_back(labels[r]);
    return out;
}

IndexList iota_rows(std::size_t n) {
    IndexList rows(n);
    std::iota(rows.begin(), rows.end(), Index{0});
    return rows;
}

EncoderShape shape_for(const CoarseView& train, const TrainConfig& cfg) {
    return EncoderShape{static_cast<std::size_t>(train.x().cols()), cfg.hidden_dim, cfg.embed_dim, train.num_coarse()};
}

void check_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw NumericError(what + " became non-finite");
}

}  // namespace

PretrainResult pretrain(const CoarseView& train, const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0) throw StructuralError("pretrain: the training split is empty");

    PretrainResult res;
    res.params = init_parameters(shape_for(train, cfg), mix_seed(cfg.seed, kInitStream));
    AdamState opt = AdamState::for_params(res.params);
    const OptimizerSettings settings = cfg.optimizer();
    Rng rng(mix_seed(cfg.seed, kPretrainStream));

    IndexList order = iota_rows(train.size());
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::span<const Index> rows(order.data() + start, std::min(cfg.batch_size, order.size() - start));
            const ForwardTrace trace = forward_trace(res.params, gather_rows(train.x(), rows));
            const Matrix& features = cfg.classify_normalized ? trace.out.embedding : trace.out.hidden;
            const CrossEntropy ce = ce_loss(classify(res.params, features), gather_labels(train.coarse(), rows));
            check_finite(ce.loss, "pretraining loss (epoch " + std::to_string(epoch) + ")");
            const ParameterSet grads = backward(res.params, trace, Matrix(), ce.grad, cfg.classify_normalized);
            apply_gradients(res.params, opt, grads, settings);
            epoch_loss += ce.loss;
            ++batches;
        }
        res.final_loss = batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0;
    }

    const EncoderOutput out = forward(res.params, train.x());
    const Matrix logits = classify(res.params, cfg.classify_normalized ? out.embedding : out.hidden);
    std::size_t hits = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index arg = 0;
        logits.row(r).maxCoeff(&arg);
        hits += static_cast<int>(arg) == train.coarse()[static_cast<std::size_t>(r)] ? 1 : 0;
    }
    res.train_accuracy = static_cast<double>(hits) / static_cast<double>(train.size());
    res.momentum = res.params;
    log::debug("pretraining done: loss " + std::to_string(res.final_loss) + ", coarse train accuracy " +
               std::to_string(res.train_accuracy));
    return res;
}

RunState start_run(const CoarseView& train, const TrainConfig& cfg) {
    PretrainResult pre = pretrain(train, cfg);
    RunState state;
    state.params = std::move(pre.params);
    state.params_m = std::move(pre.momentum);
    state.optimizer = AdamState::for_params(state.params);
    state.bank = init_bank(train, state.params_m);
    state.rng = Rng(mix_seed(cfg.seed, kTrainStream));
    return state;
}

EStep e_step(RunState& state, const CoarseView& train, const TrainConfig& cfg, std::size_t epoch,
             const Evaluator* evaluator) {
    EStep es;
    es.bank_version = state.bank.version();
    es.queries = forward(state.params, train.x()).embedding;

    std::vector<IndexList> raw(train.size());
    for (Index i = 0; i < train.size(); ++i) {
        raw[i] = topk_neighbors(state.bank, i, row_span(es.queries, static_cast<Eigen::Index>(i)), cfg.k, &es.k_clamped);
    }
    if (es.k_clamped) {
        log::warn("k=" + std::to_string(cfg.k) + " exceeds the " + std::to_string(state.bank.size() - 1) +
                  " retrievable bank rows; clamped");
    }
    es.sets = refine_all(state.bank, es.queries, train.coarse(), std::move(raw), epoch, cfg.filters());
    es.centroids = neighbor_centroid(es.sets.positives(), state.bank.keys());

    for (Stage s : kStages) {
        StageAudit a{s, es.sets.mean_size(s), std::nullopt};
        if (evaluator != nullptr) a.fine_accuracy = evaluator->neighbor_accuracy(es.sets.stage(s));
        es.audit.push_back(a);
    }
    if (state.bank.version() != es.bank_version) throw StructuralError("bank changed during an E-step");
    return es;
}

LossReport m_step(RunState& state, const CoarseView& train, const NeighborSets& sets, const TrainConfig& cfg,
                  std::span<const Index> rows, std::size_t* batches_out, const StepObserver& observer) {
    if (sets.size() != train.size()) throw StructuralError("m_step: neighbor sets do not cover the training split");
    const OptimizerSettings settings = cfg.optimizer();
    const bool check_identity = log::debug_enabled();

    LossReport sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
        const std::span<const Index> batch(rows.data() + start, std::min(cfg.batch_size, rows.size() - start));
        const ForwardTrace trace = forward_trace(state.params, gather_rows(train.x(), batch));

        std::vector<IndexList> positives;
        positives.reserve(batch.size());
        for (Index r : batch) positives.push_back(sets.positives()[r]);
        const DnaLoss dl = dna_loss(trace.out.embedding, positives, state.bank.keys(), cfg.tau);

        if (check_identity && dl.active > 0) {
            const Centroids c = neighbor_centroid(positives, state.bank.keys());
            const double rewritten = alignment_from_centroids(trace.out.embedding, c, cfg.tau);
            if (std::abs(rewritten - dl.alignment) > kIdentityTolerance) {
                throw NumericError("alignment / clustering identity violated: " + std::to_string(dl.alignment) +
                                   " vs " + std::to_string(rewritten));
            }
        }

        LossReport rep;
        rep.dna = dl.loss;
        rep.alignment = dl.alignment;
        rep.uniformity = dl.uniformity;
        rep.skipped_queries = dl.skipped;

        Matrix grad_logits;
        if (cfg.lambda_ce > 0.0) {
            const Matrix& features = cfg.classify_normalized ? trace.out.embedding : trace.out.hidden;
            const CrossEntropy ce = ce_loss(classify(state.params, features), gather_labels(train.coarse(), batch));
            rep.ce = ce.loss;
            grad_logits = ce.grad * cfg.lambda_ce;
        }
        rep.total = rep.dna + cfg.lambda_ce * rep.ce;
        check_finite(rep.total, "training loss");

        if (dl.active > 0 || cfg.lambda_ce > 0.0) {
            const Matrix grad_emb = dl.active > 0 ? dl.grad : Matrix();
            const ParameterSet grads = backward(state.params, trace, grad_emb, grad_logits, cfg.classify_normalized);
            apply_gradients(state.params, state.optimizer, grads, settings);
        }
        momentum_update(state.params_m, state.params, cfg.alpha);
        state.bank.update(batch, forward(state.params_m, trace.input).embedding);
        if (observer) observer(state.params, state.params_m);

        sum.total += rep.total;
        sum.dna += rep.dna;
        sum.alignment += rep.alignment;
        sum.uniformity += rep.uniformity;
        sum.ce += rep.ce;
        sum.skipped_queries += rep.skipped_queries;
        ++batches;
    }
    if (batches > 0) {
        const double inv = 1.0 / static_cast<double>(batches);
        sum.total *= inv;
        sum.dna *= inv;
        sum.alignment *= inv;
        sum.uniformity *= inv;
        sum.ce *= inv;
    }
    if (batches_out != nullptr) *batches_out = batches;
    return sum;
}

Checkpoint make_checkpoint(const RunState& state, const RunConfig& cfg, const std::string& stage) {
    Checkpoint c;
    c.config = cfg;
    c.query = state.params;
    c.momentum = state.params_m;
    c.optimizer = state.optimizer;
    c.epoch = state.epoch;
    c.stage = stage;
    return c;
}

RunResult run(const RunConfig& cfg, const CoarseView& train, const Evaluator* evaluator,
              const RunCallbacks& callbacks) {
    cfg.train.validate();
    const TrainConfig& tc = cfg.train;
    RunResult result;

    RunState state = start_run(train, tc);
    if (evaluator != nullptr) result.pretrain_eval = evaluator->evaluate(state.params);
    result.pretrained = make_checkpoint(state, cfg, "pretrain");
    if (callbacks.on_pretrained) callbacks.on_pretrained(state);

    IndexList order = iota_rows(train.size());
    for (std::size_t epoch = 0; epoch < tc.train_epochs; ++epoch) {
        state.rng.shuffle(order);
        EpochMetrics m;
        m.epoch = epoch;

        const std::size_t chunks = std::min(tc.esteps_per_epoch, std::max<std::size_t>(1, order.size()));
        LossReport epoch_loss;
        std::size_t total_batches = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t begin = order.size() * c / chunks;
            const std::size_t end = order.size() * (c + 1) / chunks;
            EStep es = e_step(state, train, tc, epoch, evaluator);
            if (c == 0) {
                m.audit = es.audit;
                m.k_clamped = es.k_clamped;
                m.bank_version = es.bank_version;
                m.queries_with_positives = es.centroids.num_valid();
                m.clustering_objective =
                    m.queries_with_positives > 0
                        ? clustering_objective(es.queries, es.centroids) / static_cast<double>(m.queries_with_positives)
                        : 0.0;
            }
            std::size_t batches = 0;
            const LossReport part = m_step(state, train, es.sets, tc,
                                           std::span<const Index>(order.data() + begin, end - begin), &batches);
            const double w = static_cast<double>(batches);
            epoch_loss.total += part.total * w;
            epoch_loss.dna += part.dna * w;
            epoch_loss.alignment += part.alignment * w;
            epoch_loss.uniformity += part.uniformity * w;
            epoch_loss.ce += part.ce * w;
            epoch_loss.skipped_queries += part.skipped_queries;
            total_batches += batches;
        }
        if (total_batches > 0) {
            const double inv = 1.0 / static_cast<double>(total_batches);
            epoch_loss.total *= inv;
            epoch_loss.dna *= inv;
            epoch_loss.alignment *= inv;
            epoch_loss.uniformity *= inv;
            epoch_loss.ce *= inv;
        }
        m.loss = epoch_loss;
        m.batches = total_batches;
        state.epoch = epoch + 1;
        if (evaluator != nullptr) m.eval = evaluator->evaluate(state.params);

        state.history.push_back(m);
        if (callbacks.on_epoch) callbacks.on_epoch(state, m);
    }

    result.final = make_checkpoint(state, cfg, "train");
    result.history = state.history;
    return result;
}

}  // namespace dna
