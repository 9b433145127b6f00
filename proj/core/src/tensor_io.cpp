#include "dna/tensor_io.hpp"

#include "dna/error.hpp"
#include "dna/rng.hpp"
#include "dna/text_format.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dna {

namespace {

constexpr std::string_view kMagic = "DNA-TENSORS v1";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Matrix bias_row(const Vector& b) { return Matrix(b.transpose()); }

void add_params(std::vector<NamedTensor>& out, const std::string& prefix, const ParameterSet& p) {
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const std::string base = prefix + ".layer" + std::to_string(i);
        out.push_back({base + ".weight", p.layers[i].weight});
        out.push_back({base + ".bias", bias_row(p.layers[i].bias)});
    }
    out.push_back({prefix + ".classifier.weight", p.classifier.weight});
    out.push_back({prefix + ".classifier.bias", bias_row(p.classifier.bias)});
}

const Matrix& require(const TensorFile& f, const std::string& name) {
    const Matrix* m = f.find(name);
    if (m == nullptr) throw StructuralError("checkpoint is missing tensor '" + name + "'");
    return *m;
}

Dense read_dense(const TensorFile& f, const std::string& base) {
    const Matrix& b = require(f, base + ".bias");
    if (b.rows() != 1) throw StructuralError("tensor '" + base + ".bias' must have one row");
    return Dense{require(f, base + ".weight"), b.row(0).transpose()};
}

ParameterSet read_params(const TensorFile& f, const std::string& prefix) {
    ParameterSet p;
    for (std::size_t i = 0; f.find(prefix + ".layer" + std::to_string(i) + ".weight") != nullptr; ++i) {
        p.layers.push_back(read_dense(f, prefix + ".layer" + std::to_string(i)));
    }
    p.classifier = read_dense(f, prefix + ".classifier");
    p.validate();
    return p;
}

}  // namespace

const Matrix* TensorFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t.value;
    return nullptr;
}

std::optional<std::string> TensorFile::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return std::nullopt;
}

std::string serialize(const TensorFile& file) {
    std::string out;
    out.append(kMagic).push_back('\n');
    for (const auto& [k, v] : file.meta) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw StructuralError("meta entries may not contain newlines and keys may not contain spaces");
        }
        out.append("meta ").append(k).append(" ").append(v).push_back('\n');
    }
    for (const auto& t : file.tensors) {
        out.append("tensor ").append(t.name).append(" ").append(std::to_string(t.value.rows())).append(" ")
            .append(std::to_string(t.value.cols())).push_back('\n');
        for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
                if (c > 0) out.push_back(',');
                text::append_double(out, t.value(r, c));
            }
            out.push_back('\n');
        }
    }
    const std::uint64_t sum = fnv1a64(out);
    out.append("end ").append(hex64(sum)).push_back('\n');
    return out;
}

TensorFile deserialize(const std::string& bytes) {
    const std::size_t end_pos = bytes.rfind("end ");
    if (end_pos == std::string::npos || (end_pos > 0 && bytes[end_pos - 1] != '\n')) {
        throw ParseError(0, "tensor file is truncated (no end marker)");
    }
    const std::string_view body(bytes.data(), end_pos);
    const auto stated = text::trim(std::string_view(bytes).substr(end_pos + 4));
    if (stated != hex64(fnv1a64(body))) throw ParseError(0, "tensor file checksum mismatch");

    TensorFile f;
    std::istringstream in{std::string(body)};
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || text::trim(line) != kMagic) throw ParseError(1, "expected 'DNA-TENSORS v1'");
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view l = line;
        if (l.starts_with("meta ")) {
            const auto rest = l.substr(5);
            const auto sp = rest.find(' ');
            if (sp == std::string_view::npos) throw ParseError(lineno, "malformed meta line");
            f.meta.emplace_back(std::string(rest.substr(0, sp)), std::string(rest.substr(sp + 1)));
        } else if (l.starts_with("tensor ")) {
            const auto parts = text::split(text::trim(l), ' ');
            if (parts.size() != 4) throw ParseError(lineno, "malformed tensor header");
            NamedTensor t;
            t.name = std::string(parts[1]);
            const std::size_t rows = text::parse_count(parts[2], lineno);
            const std::size_t cols = text::parse_count(parts[3], lineno);
            t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            for (std::size_t r = 0; r < rows; ++r) {
                ++lineno;
                if (!std::getline(in, line)) throw ParseError(lineno, "tensor '" + t.name + "' is truncated");
                const auto vals = text::split(text::trim(line), ',');
                if (cols > 0 && vals.size() != cols) {
                    throw ParseError(lineno, "tensor '" + t.name + "' row has " + std::to_string(vals.size()) +
                                                 " values, expected " + std::to_string(cols));
                }
                for (std::size_t c = 0; c < cols; ++c) {
                    t.value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                        text::parse_double(vals[c], lineno);
                }
            }
            f.tensors.push_back(std::move(t));
        } else if (!text::trim(l).empty()) {
            throw ParseError(lineno, "unexpected line in tensor file");
        }
    }
    return f;
}

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot open " + path.string() + " for writing");
    out << serialize(file);
    if (!out) throw StructuralError("failed writing " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StructuralError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

TensorFile to_tensor_file(const Checkpoint& ckpt) {
    TensorFile f;
    f.meta.emplace_back("kind", "checkpoint");
    f.meta.emplace_back("stage", ckpt.stage.empty() ? "train" : ckpt.stage);
    f.meta.emplace_back("epoch", std::to_string(ckpt.epoch));
    f.meta.emplace_back("adam_step", std::to_string(ckpt.optimizer.step));
    for (const auto& [k, v] : to_key_values(ckpt.config)) f.meta.emplace_back("config." + k, v);
    add_params(f.tensors, "query", ckpt.query);
    add_params(f.tensors, "momentum", ckpt.momentum);
    if (ckpt.optimizer.m.layers.size() > 0) {
        add_params(f.tensors, "adam_m", ckpt.optimizer.m);
        add_params(f.tensors, "adam_v", ckpt.optimizer.v);
    }
    return f;
}

Checkpoint checkpoint_from(const TensorFile& f) {
    if (f.meta_value("kind") != "checkpoint") throw StructuralError("tensor file is not a checkpoint");
    Checkpoint c;
    for (const auto& [k, v] : f.meta) {
        if (k.starts_with("config.")) set_config_value(c.config, k.substr(7), v);
    }
    c.stage = f.meta_value("stage").value_or("train");
    c.epoch = text::parse_count(f.meta_value("epoch").value_or("0"), 0);
    c.query = read_params(f, "query");
    c.momentum = read_params(f, "momentum");
    if (!c.query.same_shape(c.momentum)) throw StructuralError("checkpoint encoders differ in shape");
    if (f.find("adam_m.classifier.weight") != nullptr) {
        c.optimizer.m = read_params(f, "adam_m");
        c.optimizer.v = read_params(f, "adam_v");
        c.optimizer.step = text::parse_count(f.meta_value("adam_step").value_or("0"), 0);
    } else {
        c.optimizer = AdamState::for_params(c.query);
    }
    return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_tensor_file(to_tensor_file(ckpt), path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return checkpoint_from(read_tensor_file(path)); }

TensorFile bank_dump(const FeatureBank& bank) {
    TensorFile f;
    f.meta.emplace_back("kind", "bank");
    f.meta.emplace_back("version", std::to_string(bank.version()));
    f.tensors.push_back({"keys", bank.keys()});
    Matrix labels(1, static_cast<Eigen::Index>(bank.size()));
    for (std::size_t i = 0; i < bank.size(); ++i) labels(0, static_cast<Eigen::Index>(i)) = bank.coarse_labels()[i];
    f.tensors.push_back({"coarse", labels});
    return f;
}

}  // namespace dna
