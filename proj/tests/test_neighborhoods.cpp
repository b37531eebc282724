// Simplex sets, causal filtering, and the fuzzy kNN graph.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ketlab/neighborhoods.hpp"
#include "ketlab/rng.hpp"

using namespace ketlab;

TEST_CASE("build_edge_simplices S=1 has a single token") {
    const SimplexSet set = build_edge_simplices(1);
    REQUIRE(set.size() == 1);
    CHECK(set.simplices[0].vertices == std::vector<int>{0});
    CHECK(set.simplices[0].dimension() == 0);
}

TEST_CASE("build_edge_simplices S=3 enumerates tokens then adjacent edges") {
    const SimplexSet set = build_edge_simplices(3);
    REQUIRE(set.size() == 5);
    CHECK(set.simplices[0].vertices == std::vector<int>{0});
    CHECK(set.simplices[1].vertices == std::vector<int>{1});
    CHECK(set.simplices[2].vertices == std::vector<int>{2});
    CHECK(set.simplices[3].vertices == std::vector<int>{0, 1});
    CHECK(set.simplices[4].vertices == std::vector<int>{1, 2});
}

TEST_CASE("build_edge_simplices size is 2S-1 and edges are adjacent") {
    for (int S : {1, 2, 5, 17}) {
        const SimplexSet set = build_edge_simplices(S);
        CHECK(set.size() == static_cast<std::size_t>(2 * S - 1));
        for (const auto &sx : set.simplices)
            if (sx.dimension() == 1) CHECK(sx.vertices[1] == sx.vertices[0] + 1);
    }
    CHECK_THROWS_AS(build_edge_simplices(0), std::invalid_argument);
}

TEST_CASE("causal_filter keeps exactly the simplices with max vertex <= t") {
    const SimplexSet set = build_edge_simplices(3);
    CHECK(causal_filter(set, 0) == std::vector<std::size_t>{0});
    CHECK(causal_filter(set, 1) == std::vector<std::size_t>{0, 1, 3});  // (0),(1),(0,1)
    CHECK(causal_filter(set, 2).size() == set.size());
    CHECK_THROWS_AS(causal_filter(set, 3), std::invalid_argument);
}

TEST_CASE("causal_filter grows monotonically with t") {
    const SimplexSet set = build_edge_simplices(9);
    auto prev = causal_filter(set, 0);
    for (int t = 1; t < 9; ++t) {
        const auto cur = causal_filter(set, t);
        for (std::size_t idx : prev) CHECK(std::find(cur.begin(), cur.end(), idx) != cur.end());
        prev = cur;
    }
}

TEST_CASE("fuzzy knn with identical points splits weight evenly") {
    const Tensor z = Tensor::from_data({3, 2}, {1, 1, 1, 1, 1, 1});
    const KnnGraph g = build_fuzzy_knn(z, 2, 1.0, false);
    for (const auto &row : g.neighbors) {
        REQUIRE(row.size() == 2);
        CHECK(row[0].second == doctest::Approx(0.5));
        CHECK(row[1].second == doctest::Approx(0.5));
    }
}

TEST_CASE("fuzzy knn k=1 selects self with weight one") {
    const Tensor z = Tensor::from_data({4, 1}, {0.0, 1.0, 2.0, 3.0});
    const KnnGraph g = build_fuzzy_knn(z, 1, 1.0, false);
    for (int t = 0; t < 4; ++t) {
        REQUIRE(g.neighbors[t].size() == 1);
        CHECK(g.neighbors[t][0].first == t);
        CHECK(g.neighbors[t][0].second == doctest::Approx(1.0));
    }
}

TEST_CASE("fuzzy knn hand case: z = [0],[1],[10], k=2, target 1") {
    const Tensor z = Tensor::from_data({3, 1}, {0.0, 1.0, 10.0});
    const KnnGraph g = build_fuzzy_knn(z, 2, 1.0, false);
    const auto &row = g.neighbors[1];
    REQUIRE(row.size() == 2);
    // nearest: self (0), then source 0 at squared distance 1
    CHECK(row[0].first == 1);
    CHECK(row[1].first == 0);
    const double w_self = std::exp(0.0) / (std::exp(0.0) + std::exp(-1.0));
    CHECK(row[0].second == doctest::Approx(w_self));
    CHECK(row[1].second == doctest::Approx(1.0 - w_self));
}

TEST_CASE("causal knn never keeps a future source and rows stay stochastic") {
    Tensor z(Shape{6, 3});
    Rng rng(5);
    for (std::int64_t i = 0; i < z.numel(); ++i) z.data()[i] = rng.normal();
    const KnnGraph g = build_fuzzy_knn(z, 4, 0.7, true);
    for (int t = 0; t < 6; ++t) {
        double sum = 0.0;
        CHECK(g.neighbors[t].size() == static_cast<std::size_t>(std::min(4, t + 1)));
        for (const auto &[s, w] : g.neighbors[t]) {
            CHECK(s <= t);
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("fuzzy knn rejects non-positive temperature") {
    const Tensor z(Shape{2, 2});
    CHECK_THROWS_AS(build_fuzzy_knn(z, 1, 0.0, false), std::invalid_argument);
    CHECK_THROWS_AS(build_fuzzy_knn(z, 1, -1.0, false), std::invalid_argument);
}

TEST_CASE("causal mask is lower triangular including the diagonal") {
    const auto mask = causal_mask(4);
    for (int t = 0; t < 4; ++t)
        for (int s = 0; s < 4; ++s) CHECK(static_cast<int>(mask[t * 4 + s]) == (s <= t ? 1 : 0));
}
