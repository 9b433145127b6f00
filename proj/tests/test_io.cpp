#include <doctest.h>

#include "helpers.hpp"

#include "dna/config.hpp"
#include "dna/error.hpp"
#include "dna/tensor_io.hpp"
#include "dna/text_format.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace dna;

namespace {

RunConfig parse(const std::string& text, bool require_all = true) {
    std::istringstream in(text);
    return parse_config(in, require_all);
}

Checkpoint sample_checkpoint(std::uint64_t seed) {
    Checkpoint c;
    c.config.train.seed = seed;
    c.config.train.lambda_ce = 0.25;
    c.query = init_parameters(EncoderShape{5, 7, 3, 4}, seed);
    c.momentum = init_parameters(EncoderShape{5, 7, 3, 4}, seed + 1);
    c.optimizer = AdamState::for_params(c.query);
    Rng rng(seed);
    c.optimizer.m.for_each_tensor([&](double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] = rng.normal() * 1e-3;
    });
    c.optimizer.v.for_each_tensor([&](double* d, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) d[i] = rng.uniform() * 1e-7;
    });
    c.optimizer.step = 123;
    c.epoch = 4;
    c.stage = "train";
    return c;
}

}  // namespace

TEST_CASE("shortest round-trip number formatting") {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20.0);
        CHECK(text::parse_double(text::format_double(v), 0) == v);
    }
    CHECK(text::format_double(0.1) == "0.1");
    CHECK(text::format_double(-0.0) == "-0");
    CHECK_THROWS_AS(text::parse_double("1.5x", 7), ParseError);
    CHECK_THROWS_AS(text::parse_count("-3", 1), ParseError);
}

TEST_CASE("config: format then parse is the identity") {
    RunConfig c;
    c.train.k = 17;
    c.train.tau = 0.123456789;
    c.train.rank_by_abs = true;
    c.data.seed = 0xFFFFFFFFFFFFFFFFULL;
    const RunConfig back = parse(format_config(c));
    CHECK(to_key_values(back) == to_key_values(c));
    CHECK(config_keys().size() == to_key_values(c).size());
}

TEST_CASE("config: missing key, unknown key, duplicates, bad values") {
    const std::string full = format_config(RunConfig{});
    std::string missing;
    std::istringstream lines(full);
    for (std::string line; std::getline(lines, line);)
        if (line.rfind("tau", 0) != 0) missing += line + "\n";
    CHECK_THROWS_WITH_AS(parse(missing), doctest::Contains("'tau'"), ConfigError);
    CHECK(parse(missing, false).train.tau == 0.07);

    CHECK_THROWS_AS(parse(full + "bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse(full + "k = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("k = three\n", false), ConfigError);
    CHECK_THROWS_AS(parse("label_filter = maybe\n", false), ConfigError);
    CHECK(parse("# comment\n\nk = 9   # trailing\n", false).train.k == 9);
}

TEST_CASE("config: validation") {
    TrainConfig t;
    t.tau = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = TrainConfig{};
    t.alpha = 1.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = TrainConfig{};
    t.m_rank = t.embed_dim + 1;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = TrainConfig{};
    t.k = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    TrainConfig{}.validate();
}

TEST_CASE("shipped default config parses and matches built-in defaults") {
    const RunConfig c = load_config(DNA_SOURCE_DIR "/configs/default.conf");
    CHECK(to_key_values(c) == to_key_values(RunConfig{}));
}

TEST_CASE("tensor file round-trip is bit exact") {
    TensorFile f;
    f.meta.emplace_back("kind", "test");
    f.meta.emplace_back("note", "a value with spaces");
    Rng rng(4);
    f.tensors.push_back({"a", testing::random_matrix(rng, 3, 4)});
    Matrix extreme(1, 4);
    extreme << std::numeric_limits<double>::min(), std::numeric_limits<double>::max(), -0.0, 1e-300;
    f.tensors.push_back({"b", extreme});
    f.tensors.push_back({"empty", Matrix(0, 3)});
    const std::string bytes = serialize(f);
    const TensorFile back = deserialize(bytes);
    CHECK(back == f);
    CHECK(std::signbit(back.find("b")->coeff(0, 2)));
    CHECK(serialize(back) == bytes);
}

TEST_CASE("tensor file corruption is detected") {
    TensorFile f;
    f.tensors.push_back({"a", Matrix::Identity(2, 2)});
    std::string bytes = serialize(f);

    std::string flipped = bytes;
    flipped[flipped.find("tensor a") + 11] = '7';
    CHECK_THROWS_AS(deserialize(flipped), ParseError);
    CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), ParseError);
    CHECK_THROWS_AS(deserialize(bytes + "trailing\n"), ParseError);
}

TEST_CASE("checkpoint round-trip is exact") {
    const auto dir = testing::temp_dir("ckpt");
    for (std::uint64_t seed : {1, 2, 3}) {
        const Checkpoint c = sample_checkpoint(seed);
        write_checkpoint(c, dir / "c.ckpt");
        const Checkpoint back = read_checkpoint(dir / "c.ckpt");
        CHECK(back == c);
        CHECK(back.config.train.lambda_ce == 0.25);
        write_checkpoint(back, dir / "d.ckpt");
        std::ifstream a(dir / "c.ckpt"), b(dir / "d.ckpt");
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }
}

TEST_CASE("checkpoint reader rejects other tensor files") {
    TensorFile f;
    f.meta.emplace_back("kind", "bank");
    CHECK_THROWS_AS(checkpoint_from(f), StructuralError);
    TensorFile g = to_tensor_file(sample_checkpoint(1));
    g.tensors.erase(g.tensors.begin());
    CHECK_THROWS_AS(checkpoint_from(g), StructuralError);
}

TEST_CASE("bank dump holds keys and labels") {
    FeatureBank bank(Matrix::Identity(3, 3), {2, 0, 1});
    const TensorFile f = bank_dump(bank);
    CHECK(*f.find("keys") == bank.keys());
    CHECK(f.find("coarse")->row(0) == RowVector((RowVector(3) << 2, 0, 1).finished()));
    CHECK(deserialize(serialize(f)) == f);
}
