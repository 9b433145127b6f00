#include <doctest.h>

#include "helpers.hpp"

#include "dna/error.hpp"
#include "dna/eval.hpp"

#include <cmath>
#include <numeric>

using namespace dna;

namespace {

std::vector<int> relabel(const std::vector<int>& v, const std::vector<int>& perm) {
    std::vector<int> out;
    for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)]);
    return out;
}

}  // namespace

TEST_CASE("hungarian_acc examples") {
    const std::vector<int> a{0, 0, 1, 1}, b{1, 1, 0, 0}, c{0, 1, 0, 1};
    CHECK(hungarian_acc(a, b) == 1.0);
    CHECK(hungarian_acc(c, std::vector<int>{0, 0, 1, 1}) == 0.5);
    CHECK_THROWS_AS(hungarian_acc(a, std::vector<int>{0, 1}), StructuralError);
}

TEST_CASE("hungarian_acc equals factorial brute force") {
    Rng rng(77);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng.below(10);
        const auto pred = testing::random_labels(rng, n, 1 + rng.below(4));
        const auto truth = testing::random_labels(rng, n, 1 + rng.below(4));
        CHECK(std::abs(hungarian_acc(pred, truth) - oracle::brute_force_acc(pred, truth)) < 1e-12);
    }
}

TEST_CASE("hungarian_acc is at least the accuracy of any fixed mapping") {
    Rng rng(78);
    for (int t = 0; t < 50; ++t) {
        const auto pred = testing::random_labels(rng, 12, 3);
        const auto truth = testing::random_labels(rng, 12, 3);
        std::vector<int> perm{0, 1, 2};
        const double best = hungarian_acc(pred, truth);
        do {
            const auto mapped = relabel(pred, perm);
            double hits = 0;
            for (std::size_t i = 0; i < mapped.size(); ++i) hits += mapped[i] == truth[i] ? 1 : 0;
            CHECK(best >= hits / 12.0 - 1e-15);
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST_CASE("max_weight_assignment finds the optimum") {
    Matrix w(3, 3);
    w << 1, 2, 3, 2, 4, 6, 3, 6, 9;
    const auto col = max_weight_assignment(w);
    double total = 0;
    for (std::size_t r = 0; r < 3; ++r) total += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col[r]));
    CHECK(total == 14.0);
}

TEST_CASE("ari examples and oracle agreement") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(ari(a, a) == doctest::Approx(1.0));
    const std::vector<int> one(4, 0), two{0, 0, 1, 1};
    CHECK(std::abs(ari(one, two)) < 1e-12);
    CHECK(ari(one, one) == 1.0);

    Rng rng(5);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng.below(10);
        const auto p = testing::random_labels(rng, n, 1 + rng.below(4));
        const auto q = testing::random_labels(rng, n, 1 + rng.below(4));
        CHECK(std::abs(ari(p, q) - oracle::pair_counting_ari(p, q)) < 1e-12);
        CHECK(std::abs(ari(p, q) - ari(q, p)) < 1e-12);
    }
}

TEST_CASE("nmi examples and oracle agreement") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(nmi(a, a) == doctest::Approx(1.0));
    // Product design: every (pred, truth) pair appears exactly once.
    const std::vector<int> p{0, 0, 1, 1}, q{0, 1, 0, 1};
    CHECK(std::abs(nmi(p, q)) < 1e-12);
    const std::vector<int> trivial(5, 3);
    CHECK(nmi(trivial, trivial) == 1.0);
    CHECK_THROWS_AS(nmi(p, std::vector<int>{0}), StructuralError);

    Rng rng(6);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng.below(10);
        const auto x = testing::random_labels(rng, n, 1 + rng.below(4));
        const auto y = testing::random_labels(rng, n, 1 + rng.below(4));
        CHECK(std::abs(nmi(x, y) - oracle::joint_count_nmi(x, y)) < 1e-12);
        CHECK(std::abs(nmi(x, y) - nmi(y, x)) < 1e-12);
    }
}

TEST_CASE("metrics are invariant under relabeling") {
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
        const auto pred = testing::random_labels(rng, 15, 4);
        const auto truth = testing::random_labels(rng, 15, 4);
        std::vector<int> perm{2, 0, 3, 1};
        const auto pp = relabel(pred, perm), tt = relabel(truth, perm);
        CHECK(std::abs(hungarian_acc(pp, truth) - hungarian_acc(pred, truth)) < 1e-12);
        CHECK(std::abs(hungarian_acc(pred, tt) - hungarian_acc(pred, truth)) < 1e-12);
        CHECK(std::abs(ari(pp, truth) - ari(pred, truth)) < 1e-12);
        CHECK(std::abs(nmi(pred, tt) - nmi(pred, truth)) < 1e-12);
    }
}

TEST_CASE("kmeans: separated groups, single cluster, duplicates, errors") {
    Rng rng(3);
    Matrix x(20, 2);
    for (Eigen::Index r = 0; r < 20; ++r) {
        const double cx = r < 10 ? -50.0 : 50.0;
        x(r, 0) = cx + 0.1 * rng.normal();
        x(r, 1) = 0.1 * rng.normal();
    }
    const Partition p = kmeans(x, 2, 1);
    std::vector<int> truth(20, 0);
    std::fill(truth.begin() + 10, truth.end(), 1);
    CHECK(hungarian_acc(p.assignments, truth) == 1.0);
    CHECK(p.num_clusters == 2);

    const Partition one = kmeans(x, 1, 1);
    CHECK(std::all_of(one.assignments.begin(), one.assignments.end(), [](int a) { return a == 0; }));

    Matrix dup(6, 2);
    dup << 0, 0, 0, 0, 5, 5, 5, 5, 0, 0, 9, 9;
    const Partition d = kmeans(dup, 3, 4);
    CHECK(d.assignments[0] == d.assignments[1]);
    CHECK(d.assignments[0] == d.assignments[4]);
    CHECK(d.assignments[2] == d.assignments[3]);

    CHECK_THROWS_AS(kmeans(dup, 7, 1), StructuralError);
    CHECK(kmeans(x, 2, 5).assignments == kmeans(x, 2, 5).assignments);
}

TEST_CASE("neighbor_accuracy") {
    const std::vector<int> fine{0, 0, 1, 1};
    CHECK(neighbor_accuracy({{1}, {0}, {3}, {2}}, fine, fine) == 1.0);
    CHECK(neighbor_accuracy({{1, 2}, {0, 3}, {}, {}}, fine, std::vector<int>{0, 0, 1, 0}) == 0.75);
    CHECK_THROWS_AS(neighbor_accuracy({{}, {}, {}, {}}, fine, fine), StructuralError);
    const std::vector<int> unknown{0, -1, 1, 1};
    CHECK_THROWS_AS(neighbor_accuracy({{1}, {0}, {3}, {2}}, fine, unknown), StructuralError);
}

TEST_CASE("evaluate_embeddings reports k and seed") {
    Rng rng(2);
    Matrix emb = testing::random_unit_rows(rng, 12, 3);
    const auto labels = testing::random_labels(rng, 12, 3);
    const EvalReport r = evaluate_embeddings(emb, labels, 3, 42);
    CHECK(r.k == 3);
    CHECK(r.seed == 42);
    CHECK(r.acc >= 1.0 / 3.0 - 1e-12);
    CHECK(r.acc <= 1.0);
}
