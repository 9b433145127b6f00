#pragma once

#include "dna/config.hpp"
#include "dna/denoise.hpp"
#include "dna/encoder.hpp"
#include "dna/eval.hpp"
#include "dna/membank.hpp"
#include "dna/objective.hpp"
#include "dna/rng.hpp"
#include "dna/synthdata.hpp"
#include "dna/tensor_io.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace dna {

struct StageAudit {
    Stage stage = Stage::raw;
    double mean_size = 0.0;
    std::optional<double> fine_accuracy;  // diagnostic only; needs fine labels
};

struct EpochMetrics {
    std::size_t epoch = 0;
    LossReport loss;                // mean over the epoch's minibatches
    std::size_t batches = 0;
    std::vector<StageAudit> audit;  // from the epoch's first E-step
    double clustering_objective = 0.0;  // mean |q_i - mu_i|^2 over queries with positives
    std::size_t queries_with_positives = 0;
    bool k_clamped = false;
    std::uint64_t bank_version = 0;
    std::optional<EvalReport> eval;
};

/// Mutable state of a run. Only the query parameters receive gradients; the
/// momentum parameters change solely through momentum_update.
struct RunState {
    ParameterSet params;
    ParameterSet params_m;
    AdamState optimizer;
    FeatureBank bank;
    std::size_t epoch = 0;
    Rng rng{0};
    std::vector<EpochMetrics> history;
};

struct PretrainResult {
    ParameterSet params;
    ParameterSet momentum;  // exact copy of params
    double final_loss = 0.0;
    double train_accuracy = 0.0;  // coarse accuracy on the training split
};

/// Query encoder + classifier trained with coarse cross-entropy only.
/// Throws NumericError if the loss becomes non-finite.
PretrainResult pretrain(const CoarseView& train, const TrainConfig& cfg);

/// Pretrains, copies into the momentum encoder and fills the bank.
RunState start_run(const CoarseView& train, const TrainConfig& cfg);

struct EStep {
    NeighborSets sets;
    Centroids centroids;
    Matrix queries;  // query embeddings the sets were computed from
    std::vector<StageAudit> audit;
    bool k_clamped = false;
    std::uint64_t bank_version = 0;
};

/// Retrieves and refines neighbors for every training sample against the
/// current (frozen) bank. `evaluator`, when given, only scores the sets.
EStep e_step(RunState& state, const CoarseView& train, const TrainConfig& cfg, std::size_t epoch,
             const Evaluator* evaluator = nullptr);

using StepObserver = std::function<void(const ParameterSet& query, const ParameterSet& momentum)>;

/// One pass over `rows` (training-row indices, already in batch order):
/// forward, DNA + lambda_ce * CE, optimizer step, momentum update, bank row
/// refresh. Batches without any loss term skip the optimizer step.
/// `observer` runs after every batch.
LossReport m_step(RunState& state, const CoarseView& train, const NeighborSets& sets, const TrainConfig& cfg,
                  std::span<const Index> rows, std::size_t* batches_out = nullptr,
                  const StepObserver& observer = {});

struct RunCallbacks {
    std::function<void(const RunState&)> on_pretrained;
    std::function<void(const RunState&, const EpochMetrics&)> on_epoch;
};

struct RunResult {
    Checkpoint pretrained;
    Checkpoint final;
    std::optional<EvalReport> pretrain_eval;
    std::vector<EpochMetrics> history;
};

/// pretrain -> bank -> train_epochs x { E-step, M-step, evaluate }.
RunResult run(const RunConfig& cfg, const CoarseView& train, const Evaluator* evaluator = nullptr,
              const RunCallbacks& callbacks = {});

Checkpoint make_checkpoint(const RunState& state, const RunConfig& cfg, const std::string& stage);

}  // namespace dna
