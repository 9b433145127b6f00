#include "dna/config.hpp"

#include "dna/error.hpp"
#include "dna/text_format.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace dna {

namespace {

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

double to_real(const std::string& key, const std::string& v) {
    try {
        return text::parse_double(v, 0);
    } catch (const ParseError&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::size_t to_count(const std::string& key, const std::string& v) {
    try {
        return text::parse_count(v, 0);
    } catch (const ParseError&) {
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto s = text::trim(v);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': expected an unsigned 64-bit integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto s = text::trim(v);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

#define DNA_REAL(name, member)                                                               \
    Field {                                                                                  \
        name, [](RunConfig& c, const std::string& v) { c.member = to_real(name, v); },       \
            [](const RunConfig& c) { return text::format_double(c.member); }                 \
    }
#define DNA_COUNT(name, member)                                                              \
    Field {                                                                                  \
        name, [](RunConfig& c, const std::string& v) { c.member = to_count(name, v); },      \
            [](const RunConfig& c) { return std::to_string(c.member); }                      \
    }
#define DNA_U64(name, member)                                                                \
    Field {                                                                                  \
        name, [](RunConfig& c, const std::string& v) { c.member = to_u64(name, v); },        \
            [](const RunConfig& c) { return std::to_string(c.member); }                      \
    }
#define DNA_BOOL(name, member)                                                               \
    Field {                                                                                  \
        name, [](RunConfig& c, const std::string& v) { c.member = to_bool(name, v); },       \
            [](const RunConfig& c) { return bool_str(c.member); }                            \
    }

const std::vector<Field>& schema() {
    static const std::vector<Field> fields{
        DNA_COUNT("num_coarse", data.num_coarse),
        DNA_COUNT("fines_per_coarse", data.fines_per_coarse),
        DNA_COUNT("samples_per_fine", data.samples_per_fine),
        DNA_COUNT("input_dim", data.input_dim),
        DNA_REAL("coarse_spread", data.coarse_spread),
        DNA_REAL("fine_spread", data.fine_spread),
        DNA_REAL("noise_sigma", data.noise_sigma),
        DNA_REAL("coarse_imbalance", data.coarse_imbalance),
        DNA_U64("data_seed", data.seed),
        DNA_REAL("tau", train.tau),
        DNA_REAL("alpha", train.alpha),
        DNA_COUNT("k", train.k),
        DNA_COUNT("m_rank", train.m_rank),
        DNA_REAL("lr", train.lr),
        DNA_REAL("weight_decay", train.weight_decay),
        DNA_REAL("grad_clip", train.grad_clip),
        DNA_COUNT("batch_size", train.batch_size),
        DNA_COUNT("pretrain_epochs", train.pretrain_epochs),
        DNA_COUNT("train_epochs", train.train_epochs),
        DNA_REAL("lambda_ce", train.lambda_ce),
        DNA_COUNT("rank_epochs", train.rank_epochs),
        DNA_U64("seed", train.seed),
        DNA_COUNT("hidden_dim", train.hidden_dim),
        DNA_COUNT("embed_dim", train.embed_dim),
        DNA_BOOL("label_filter", train.label_filter),
        DNA_BOOL("reciprocal_filter", train.reciprocal_filter),
        DNA_BOOL("rank_by_abs", train.rank_by_abs),
        DNA_BOOL("classify_normalized", train.classify_normalized),
        DNA_COUNT("esteps_per_epoch", train.esteps_per_epoch),
        DNA_COUNT("kmeans_restarts", train.kmeans_restarts),
    };
    return fields;
}

#undef DNA_REAL
#undef DNA_COUNT
#undef DNA_U64
#undef DNA_BOOL

}  // namespace

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (m_rank < 1) throw ConfigError("m_rank must be >= 1");
    if (m_rank > embed_dim) throw ConfigError("m_rank must not exceed embed_dim");
    if (!(lr >= 0.0) || !(weight_decay >= 0.0) || !(grad_clip >= 0.0)) {
        throw ConfigError("lr, weight_decay and grad_clip must be nonnegative");
    }
    if (!(lambda_ce >= 0.0)) throw ConfigError("lambda_ce must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (hidden_dim < 1 || embed_dim < 1) throw ConfigError("hidden_dim and embed_dim must be >= 1");
    if (esteps_per_epoch < 1) throw ConfigError("esteps_per_epoch must be >= 1");
    if (kmeans_restarts < 1) throw ConfigError("kmeans_restarts must be >= 1");
}

FilterSettings TrainConfig::filters() const {
    return FilterSettings{label_filter, reciprocal_filter, rank_epochs, m_rank, rank_by_abs};
}

OptimizerSettings TrainConfig::optimizer() const {
    OptimizerSettings o;
    o.lr = lr;
    o.weight_decay = weight_decay;
    o.grad_clip = grad_clip;
    return o;
}

KeyValues to_key_values(const RunConfig& cfg) {
    KeyValues kv;
    for (const auto& f : schema()) kv.emplace_back(f.key, f.get(cfg));
    return kv;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : schema()) keys.emplace_back(f.key);
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : schema()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(std::istream& in, bool require_all) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body(line);
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = text::trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key(text::trim(body.substr(0, eq)));
        const std::string value(text::trim(body.substr(eq + 1)));
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
        set_config_value(cfg, key, value);
    }
    if (require_all) {
        for (const auto& f : schema()) {
            if (!seen.contains(f.key)) throw ConfigError("config is missing key '" + std::string(f.key) + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, bool require_all) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in, require_all);
}

std::string format_config(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& [k, v] : to_key_values(cfg)) out << k << " = " << v << '\n';
    return out.str();
}

}  // namespace dna
