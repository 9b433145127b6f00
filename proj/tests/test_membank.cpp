#include <doctest.h>

#include "helpers.hpp"

#include "dna/error.hpp"
#include "dna/membank.hpp"
#include "dna/synthdata.hpp"

#include <cmath>

using namespace dna;

namespace {

FeatureBank basis_bank() { return FeatureBank(Matrix::Identity(3, 3), {0, 0, 1}); }

}  // namespace

TEST_CASE("cosine_sim closed forms") {
    const std::vector<double> e1{1, 0}, e2{0, 1}, d{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)};
    CHECK(cosine_sim(e1, e2) == 0.0);
    CHECK(std::abs(cosine_sim(d, e1) - 0.70710678) < 1e-8);
    const std::vector<double> v{3.0, -4.0, 12.0};
    CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_sim(v, v) <= 1.0);
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(cosine_sim(zero, e1), NumericError);
}

TEST_CASE("bank construction checks unit norms") {
    CHECK_THROWS_AS(FeatureBank(Matrix::Ones(2, 2), {0, 0}), NumericError);
    CHECK_THROWS_AS(FeatureBank(Matrix::Identity(2, 2), {0}), StructuralError);
}

TEST_CASE("update: write-read, version bump, bounds") {
    FeatureBank bank = basis_bank();
    const std::uint64_t v0 = bank.version();
    Matrix row(1, 3);
    row << 0, 0.6, 0.8;
    bank.update(IndexList{0}, row);
    CHECK(bank.keys().row(0) == row.row(0));
    CHECK(bank.keys().row(1) == Matrix::Identity(3, 3).row(1));
    CHECK(bank.version() > v0);

    const FeatureBank copy = bank;
    const std::uint64_t v1 = bank.version();
    bank.update(IndexList{2}, bank.keys().row(2));
    CHECK(bank == copy);
    CHECK(bank.version() == v1 + 1);

    CHECK_THROWS_AS(bank.update(IndexList{3}, row), StructuralError);
    Matrix not_unit(1, 3);
    not_unit << 1, 1, 0;
    CHECK_THROWS_AS(bank.update(IndexList{1}, not_unit), NumericError);
}

TEST_CASE("topk: standard basis tie-break and self match") {
    const FeatureBank bank = basis_bank();
    const std::vector<double> e1{1, 0, 0};
    CHECK(topk_neighbors(bank, Index{0}, e1, 2) == IndexList{1, 2});
    CHECK(topk_neighbors(bank, std::nullopt, e1, 1) == IndexList{0});
    const std::vector<double> e3{0, 0, 1};
    CHECK(topk_neighbors(bank, Index{0}, e3, 1) == IndexList{2});
}

TEST_CASE("topk: k larger than the bank is clamped and flagged") {
    const FeatureBank bank = basis_bank();
    const std::vector<double> e1{1, 0, 0};
    bool clamped = false;
    CHECK(topk_neighbors(bank, Index{0}, e1, 10, &clamped).size() == 2);
    CHECK(clamped);
    clamped = false;
    CHECK(topk_neighbors(bank, Index{0}, e1, 2, &clamped).size() == 2);
    CHECK_FALSE(clamped);
}

TEST_CASE("topk: equals the full-sort oracle and never returns self") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.below(199);
        const std::size_t dim = 1 + rng.below(8);
        Matrix keys = testing::random_unit_rows(rng, n, dim);
        // Duplicate some rows so ties actually occur.
        for (std::size_t d = 0; d < n / 5; ++d) {
            keys.row(static_cast<Eigen::Index>(rng.below(n))) = keys.row(static_cast<Eigen::Index>(rng.below(n))).eval();
        }
        const FeatureBank bank(keys, std::vector<int>(n, 0));
        for (int q = 0; q < 5; ++q) {
            const Index self = rng.below(n);
            const std::size_t k = 1 + rng.below(n);
            const Vector query = keys.row(static_cast<Eigen::Index>(rng.below(n))).transpose();
            const IndexList got = topk_neighbors(bank, self, std::span<const double>(query.data(), dim), k,
                                                 nullptr);
            CHECK(got == oracle::full_sort_topk(keys, self, query, k));
            CHECK(std::find(got.begin(), got.end(), self) == got.end());
            CHECK(got.size() == std::min(k, n - 1));
        }
    }
}

TEST_CASE("init_bank: full pass, unit rows, deterministic") {
    HierarchySpec s;
    s.num_coarse = 3;
    s.fines_per_coarse = 2;
    s.samples_per_fine = 10;
    s.input_dim = 5;
    const Dataset ds = generate(s);
    const CoarseView view(ds.train, ds.num_coarse);
    const ParameterSet p = init_parameters(EncoderShape{5, 6, 4, 3}, 2);
    const FeatureBank bank = init_bank(view, p);
    CHECK(bank.size() == ds.train.size());
    CHECK(bank.dim() == 4);
    for (Eigen::Index r = 0; r < bank.keys().rows(); ++r) CHECK(std::abs(bank.keys().row(r).norm() - 1) < 1e-6);
    CHECK(std::equal(bank.coarse_labels().begin(), bank.coarse_labels().end(), ds.train.coarse.begin()));
    CHECK(init_bank(view, p) == bank);
    CHECK(bank.keys() == forward(p, ds.train.x).embedding);
}

TEST_CASE("rank sets are cached per version") {
    Rng rng(3);
    FeatureBank bank(testing::random_unit_rows(rng, 6, 5), std::vector<int>(6, 0));
    CHECK_FALSE(bank.rank_sets_current());
    CHECK_THROWS_AS(bank.rank_sets(), StructuralError);
    bank.refresh_rank_sets(2, false);
    CHECK(bank.rank_sets_current());
    CHECK(bank.rank_sets() == rank_sets(bank.keys(), 2));
    bank.update(IndexList{1}, testing::random_unit_rows(rng, 1, 5));
    CHECK_FALSE(bank.rank_sets_current());
    CHECK_THROWS_AS(bank.rank_sets(), StructuralError);
    bank.refresh_rank_sets(2, false);
    CHECK(bank.rank_sets() == rank_sets(bank.keys(), 2));
}
