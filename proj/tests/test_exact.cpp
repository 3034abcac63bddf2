#include <gtest/gtest.h>

#include "oracle.hpp"
#include "perclab/cluster.hpp"
#include "perclab/exact.hpp"

using namespace perclab;

namespace {
const Lattice kNN2(2, Adjacency::nearest());

std::vector<Edge> b1_edges() { return oracle::canonical_edges(oracle::b1_graph(), kNN2); }
} // namespace

TEST(Exact, OneArmOnUnitBox) {
    // 0 reaches dB(1) inside B(1) iff one of its four edges is open: 1 - 2^-4.
    const auto prob = enumerate_exact(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) {
        return connected(b, Point{0, 0}, Boundary::sphere(1), Region::box(1)).connected;
    });
    EXPECT_NEAR(static_cast<double>(prob), 0.9375, 1e-15);
}

TEST(Exact, RationalValue) {
    const auto poly = exact_sum(kNN2, b1_edges(), [](const MaskBonds& b) {
        return connected(b, Point{0, 0}, Boundary::sphere(1), Region::box(1)).connected ? 1.0 : 0.0;
    });
    const auto q = poly.rational(1, 2);
    ASSERT_TRUE(q);
    EXPECT_EQ(static_cast<std::uint64_t>(q->first), 15u);
    EXPECT_EQ(static_cast<std::uint64_t>(q->second), 16u);
    const auto third = poly.rational(1, 3);  // 1 - (2/3)^4 = 65/81
    ASSERT_TRUE(third);
    EXPECT_EQ(static_cast<std::uint64_t>(third->first), 65u);
    EXPECT_EQ(static_cast<std::uint64_t>(third->second), 81u);
}

TEST(Exact, CornerConnectionMatchesBruteForce) {
    const auto g = oracle::b1_graph();
    const int src = g.index({-1, -1}), dst = g.index({1, 1});
    for (const double p : {0.1, 0.5, 0.8}) {
        const auto want = oracle::enumerate(g, p, [&](const std::vector<bool>& open) {
            return oracle::reach(g, src, open)[static_cast<std::size_t>(dst)] ? 1.0 : 0.0;
        });
        const auto got = enumerate_exact(kNN2, b1_edges(), p, [](const MaskBonds& b) {
            return connected(b, Point{-1, -1}, Point{1, 1}, Region::box(1)).connected;
        });
        EXPECT_NEAR(static_cast<double>(got), static_cast<double>(want), 1e-14);
    }
}

TEST(Exact, BoundaryCountLawMatchesBruteForce) {
    const auto g = oracle::b1_graph();
    const auto want = oracle::enumerate_law(g, 0.5, [&](const std::vector<bool>& open) {
        const auto seen = oracle::reach(g, g.index({0, 0}), open);
        std::uint64_t c = 0;
        for (std::size_t i = 0; i < seen.size(); ++i) c += (seen[i] && g.verts[i].norm() == 1) ? 1 : 0;
        return c;
    });
    const auto got = exact_distribution(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) {
        return boundary_count(b, Region::box(1), Boundary::sphere(1), Point{0, 0}).count;
    });
    ASSERT_EQ(got.size(), want.size());
    long double total = 0;
    for (const auto& [k, v] : want) {
        EXPECT_NEAR(static_cast<double>(got.at(k)), static_cast<double>(v), 1e-15) << "X = " << k;
        total += got.at(k);
    }
    EXPECT_NEAR(static_cast<double>(total), 1.0, 1e-15);
    EXPECT_NEAR(static_cast<double>(got.at(0)), 1.0 / 16, 1e-15);
}

TEST(Exact, ExpectationIsLinear) {
    const auto edges = b1_edges();
    const auto size = [](const MaskBonds& b) {
        return static_cast<double>(explore_cluster(b, Point{0, 0}, Region::box(1), {}).size());
    };
    const auto e = exact_expectation(kNN2, edges, 0.0, size);
    EXPECT_NEAR(static_cast<double>(e), 1.0, 1e-15);
    EXPECT_NEAR(static_cast<double>(exact_expectation(kNN2, edges, 1.0, size)), 9.0, 1e-15);
}

TEST(Exact, TooManyEdgesRejected) {
    std::vector<Edge> edges;
    for (int i = 0; i < 25; ++i) edges.push_back(canonical_edge(kNN2, {i, 0}, {i + 1, 0}));
    EXPECT_THROW(enumerate_exact(kNN2, edges, 0.5, [](const MaskBonds&) { return true; }), ResourceError);
}
