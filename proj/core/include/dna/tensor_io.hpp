#pragma once

#include "dna/config.hpp"
#include "dna/encoder.hpp"
#include "dna/membank.hpp"
#include "dna/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dna {

struct NamedTensor {
    std::string name;
    Matrix value;

    friend bool operator==(const NamedTensor& a, const NamedTensor& b) {
        return a.name == b.name && a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols() &&
               a.value == b.value;
    }
};

/// Text tensor container:
///
///   DNA-TENSORS v1
///   meta <key> <value>
///   tensor <name> <rows> <cols>
///   <row 0 values, comma separated>
///   ...
///   end <fnv1a64 of every preceding byte, 16 hex digits>
///
/// Values use the shortest decimal form that parses back to the same double,
/// so a write/read cycle is bit-exact.
struct TensorFile {
    KeyValues meta;
    std::vector<NamedTensor> tensors;

    const Matrix* find(const std::string& name) const;
    std::optional<std::string> meta_value(const std::string& key) const;

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

std::string serialize(const TensorFile& file);
TensorFile deserialize(const std::string& bytes);

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Everything needed to resume or evaluate a run.
struct Checkpoint {
    RunConfig config;
    ParameterSet query;
    ParameterSet momentum;
    AdamState optimizer;
    std::size_t epoch = 0;  // completed training epochs; 0 right after pretraining
    std::string stage;      // "pretrain" or "train"

    friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
        return to_key_values(a.config) == to_key_values(b.config) && a.query == b.query && a.momentum == b.momentum &&
               a.optimizer.m == b.optimizer.m && a.optimizer.v == b.optimizer.v &&
               a.optimizer.step == b.optimizer.step && a.epoch == b.epoch && a.stage == b.stage;
    }
};

TensorFile to_tensor_file(const Checkpoint& ckpt);
Checkpoint checkpoint_from(const TensorFile& file);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

TensorFile bank_dump(const FeatureBank& bank);

}  // namespace dna
