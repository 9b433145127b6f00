#pragma once

#include "dna/denoise.hpp"
#include "dna/encoder.hpp"
#include "dna/synthdata.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dna {

struct TrainConfig {
    double tau = 0.07;
    double alpha = 0.99;
    std::size_t k = 60;
    std::size_t m_rank = 5;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    std::size_t batch_size = 64;
    std::size_t pretrain_epochs = 100;
    std::size_t train_epochs = 20;
    double lambda_ce = 1.0;
    std::size_t rank_epochs = 1;
    std::uint64_t seed = 1;

    std::size_t hidden_dim = 128;
    std::size_t embed_dim = 16;
    bool label_filter = true;
    bool reciprocal_filter = true;
    bool rank_by_abs = false;
    bool classify_normalized = false;
    std::size_t esteps_per_epoch = 1;
    std::size_t kmeans_restarts = 10;

    // Throws ConfigError naming the violated constraint.
    void validate() const;

    FilterSettings filters() const;
    OptimizerSettings optimizer() const;
};

struct RunConfig {
    HierarchySpec data;
    TrainConfig train;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Every configuration key with its current value, in schema order.
KeyValues to_key_values(const RunConfig& cfg);
std::vector<std::string> config_keys();

/// Sets one key; throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines (`#` starts a comment). With `require_all`,
/// every schema key must appear; the error names the first missing key.
RunConfig parse_config(std::istream& in, bool require_all = true);
RunConfig load_config(const std::filesystem::path& path, bool require_all = true);

std::string format_config(const RunConfig& cfg);

}  // namespace dna
