#pragma once

#include "dna/config.hpp"
#include "dna/eval.hpp"
#include "dna/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dna::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kNumeric = 2,
    kPartialAblation = 3,
};

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_ce;
    std::optional<std::size_t> k;
    std::optional<std::size_t> rank_epochs;
    bool rank_by_abs = false;
};

/// Loads a complete config file and applies the overrides to the training
/// section. `--seed` is applied to the training seed.
RunConfig resolve_config(const std::filesystem::path& config_path, const Overrides& ov);

/// Writes the generated dataset; `--seed` replaces the data seed.
Dataset cmd_generate(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
                     std::optional<std::uint64_t> seed);

/// Trains on a dataset file and writes into `out_dir`:
///   metrics.jsonl, summary.json, neighbor_audit.csv,
///   pretrain.ckpt, last.ckpt (rewritten after every epoch), final.ckpt.
/// Returns the summary document that was written.
std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                      const std::filesystem::path& out_dir);

struct AblationVariant {
    std::string id;
    KeyValues delta;  // config keys set on top of the shared base config
};

/// The ladder in row order, each a pure config delta.
const std::vector<AblationVariant>& ablation_ladder();

/// Resolves names (with aliases) to ladder rows, keeping ladder order.
/// Throws ConfigError for an unknown name.
std::vector<AblationVariant> select_variants(const std::vector<std::string>& names);

/// Seed used for repeat `r`; shared by every variant so rows are paired.
std::uint64_t repeat_seed(std::uint64_t base, std::size_t r);

struct AblationRun {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double acc = 0, ari = 0, nmi = 0;
    std::optional<double> neighbor_acc;  // epoch-0 positive-set fine accuracy
    double pretrain_acc = 0;
};

struct AblationRow {
    AblationVariant variant;
    std::vector<AblationRun> runs;
    bool failed() const;
};

/// Runs every selected variant for `repeats` seeds and writes ablation.csv and
/// ablation.json into `out_dir`.
std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::filesystem::path& dataset_path,
                                    const std::filesystem::path& out_dir, const std::vector<AblationVariant>& variants,
                                    std::size_t repeats);

/// Report JSON for a checkpoint on the dataset's test split. Fails when the
/// test split lacks fine labels; neighbor_acc is left out when the training
/// split lacks them.
std::string cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& dataset_path,
                     std::optional<std::uint64_t> seed);

/// Full entry point: parses arguments, dispatches, maps exceptions to exit
/// codes and writes structured error JSON to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dna::cli
