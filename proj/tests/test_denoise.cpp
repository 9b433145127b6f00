#include <doctest.h>

#include "helpers.hpp"

#include "dna/denoise.hpp"
#include "dna/error.hpp"

#include <algorithm>
#include <set>

using namespace dna;

namespace {

bool is_subset(const IndexList& small, const IndexList& big) {
    const std::set<Index> b(big.begin(), big.end());
    return std::all_of(small.begin(), small.end(), [&](Index i) { return b.count(i) > 0; });
}

bool contains(const IndexList& l, Index v) { return std::find(l.begin(), l.end(), v) != l.end(); }

}  // namespace

TEST_CASE("rank_set examples") {
    const std::vector<double> v{0.1, 0.9, 0.5, 0.3};
    CHECK(rank_set(v, 2).indices == IndexList{1, 2});
    const std::vector<double> flat{0.4, 0.4, 0.4};
    CHECK(rank_set(flat, 2).indices == IndexList{0, 1});
    const std::vector<double> signs{-0.9, 0.2, 0.5};
    CHECK(rank_set(signs, 1).indices == IndexList{2});
    CHECK(rank_set(signs, 1, true).indices == IndexList{0});
    CHECK_THROWS_AS(rank_set(v, 5), StructuralError);
    CHECK_THROWS_AS(rank_set(v, 0), StructuralError);
}

TEST_CASE("label_filter") {
    const std::vector<int> labels{0, 1, 0, 1, 0};
    CHECK(label_filter(IndexList{2, 4}, 0, labels) == IndexList{2, 4});
    CHECK(label_filter(IndexList{1, 3}, 0, labels).empty());
    CHECK(label_filter(IndexList{4, 1, 0, 3, 2}, 1, labels) == IndexList{1, 3});
}

TEST_CASE("reciprocal_filter examples") {
    // A_1={2,3}, A_2={1}, A_3={2}, shifted to 0-based indices.
    const std::vector<IndexList> a{{1, 2}, {0}, {1}};
    const auto r = reciprocal_filter(a);
    CHECK(r[0] == IndexList{1});
    CHECK(r[1] == IndexList{0});
    CHECK(r[2].empty());

    const std::vector<IndexList> mutual{{1, 2}, {2, 0}, {0, 1}};
    CHECK(reciprocal_filter(mutual) == mutual);
}

TEST_CASE("reciprocal_filter: symmetric on random inputs") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<IndexList> a(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (Index j : testing::random_subset(rng, n, 0, n))
                if (j != i) a[i].push_back(j);
        }
        const auto r = reciprocal_filter(a);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(is_subset(r[i], a[i]));
            for (std::size_t j = 0; j < n; ++j) {
                const bool brute = contains(a[i], j) && contains(a[j], i);
                CHECK(contains(r[i], j) == brute);
                CHECK(contains(r[i], j) == contains(r[j], i));
            }
        }
    }
}

TEST_CASE("rank_filter examples") {
    const std::vector<double> q1{0.9, 0.8, 0.1}, h1{0.8, 0.9, 0.1};
    const std::vector<RankSet> bank1{rank_set(h1, 2)};
    CHECK(rank_filter(IndexList{0}, rank_set(q1, 2), bank1) == IndexList{0});

    const std::vector<double> q2{0.9, 0.1, 0.8}, h2{0.1, 0.9, 0.8};
    const std::vector<RankSet> bank2{rank_set(h2, 2)};
    CHECK(rank_filter(IndexList{0}, rank_set(q2, 2), bank2).empty());

    CHECK(rank_filter(IndexList{0}, rank_set(h2, 2), bank2) == IndexList{0});
}

TEST_CASE("refine_all: schedule and subset chain on fuzzed banks") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.below(40);
        const std::size_t dim = 2 + rng.below(6);
        const std::size_t m = 1 + rng.below(dim);
        const Matrix keys = testing::random_unit_rows(rng, n, dim);
        const std::vector<int> coarse = testing::random_labels(rng, n, 1 + rng.below(3));
        FeatureBank bank(keys, coarse);
        Matrix queries = keys;
        // Perturb queries so they are not identical to their bank rows.
        queries += testing::random_matrix(rng, n, dim, 0.2);
        for (Eigen::Index r = 0; r < queries.rows(); ++r) queries.row(r).normalize();

        const std::size_t k = 1 + rng.below(n - 1);
        std::vector<IndexList> raw(n);
        for (Index i = 0; i < n; ++i) raw[i] = topk_neighbors(bank, i, row_span(queries, static_cast<Eigen::Index>(i)), k);

        FilterSettings fs;
        fs.m_rank = m;
        fs.rank_by_abs = rng.below(2) == 1;
        const std::size_t epoch = rng.below(3);
        fs.rank_epochs = rng.below(3);
        const NeighborSets s = refine_all(bank, queries, coarse, raw, epoch, fs);

        for (Index i = 0; i < n; ++i) {
            CHECK(s.raw[i].size() == std::min(k, n - 1));
            CHECK_FALSE(contains(s.raw[i], i));
            CHECK(is_subset(s.label[i], s.raw[i]));
            CHECK(is_subset(s.reciprocal[i], s.label[i]));
            CHECK(is_subset(s.rank[i], s.reciprocal[i]));
            for (Index j : s.label[i]) CHECK(coarse[j] == coarse[i]);
            for (Index j : s.reciprocal[i]) CHECK(contains(s.reciprocal[j], i));
            if (epoch >= fs.rank_epochs) CHECK(s.rank[i] == s.reciprocal[i]);
        }
        for (Stage st : {Stage::label, Stage::reciprocal, Stage::rank}) {
            CHECK(s.mean_size(st) <= s.mean_size(static_cast<Stage>(static_cast<int>(st) - 1)));
        }
    }
}

TEST_CASE("refine_all: disabled stages pass through") {
    const Matrix keys = Matrix::Identity(4, 4);
    FeatureBank bank(keys, {0, 1, 0, 1});
    const std::vector<IndexList> raw{{1, 2}, {0}, {0, 3}, {2}};
    FilterSettings fs;
    fs.label = false;
    fs.reciprocal = false;
    fs.rank_epochs = 0;
    const NeighborSets s = refine_all(bank, keys, bank.coarse_labels(), raw, 0, fs);
    CHECK(s.label == raw);
    CHECK(s.reciprocal == raw);
    CHECK(s.positives() == raw);

    fs.label = true;
    const NeighborSets t = refine_all(bank, keys, bank.coarse_labels(), raw, 0, fs);
    CHECK(t.label == std::vector<IndexList>{{2}, {}, {0}, {}});
}

TEST_CASE("refine_all: rank filter active only in the first rank_epochs") {
    // Query 0 and bank row 1 share coarse label and reciprocity but differ in
    // their top coordinate.
    Matrix keys(2, 2);
    keys << 1, 0, 0, 1;
    FeatureBank bank(keys, {0, 0});
    const std::vector<IndexList> raw{{1}, {0}};
    FilterSettings fs;
    fs.m_rank = 1;
    fs.rank_epochs = 1;
    CHECK(refine_all(bank, keys, bank.coarse_labels(), raw, 0, fs).rank == std::vector<IndexList>{{}, {}});
    CHECK(refine_all(bank, keys, bank.coarse_labels(), raw, 3, fs).rank == raw);
}

TEST_CASE("stage names") {
    CHECK(stage_name(Stage::raw) == "knn");
    CHECK(stage_name(Stage::label) == "label");
    CHECK(stage_name(Stage::reciprocal) == "reciprocal");
    CHECK(stage_name(Stage::rank) == "rank");
}
