#include <gtest/gtest.h>

#include <cmath>

#include "perclab/bonds.hpp"
#include "perclab/region.hpp"

using namespace perclab;

namespace {
const Lattice kNN2(2, Adjacency::nearest());
}

TEST(EdgeEncoding, ZigZagVarintLayout) {
    const Edge e{Point{-1, 70}, 3};
    const auto b = encode_edge(e);
    ASSERT_EQ(b.size, 4u);
    EXPECT_EQ(b.data[0], 0x01);
    EXPECT_EQ(b.data[1], 0x8C);
    EXPECT_EQ(b.data[2], 0x01);
    EXPECT_EQ(b.data[3], 0x03);
}

TEST(EdgeEncoding, CanonicalFormUsesSmallerEndpoint) {
    const auto e1 = canonical_edge(kNN2, {0, 0}, {1, 0});
    const auto e2 = canonical_edge(kNN2, {1, 0}, {0, 0});
    EXPECT_EQ(e1, e2);
    EXPECT_EQ(e1.lo, (Point{0, 0}));
    EXPECT_EQ(e1.offset_index, 3u);
    EXPECT_EQ(e1.hi(kNN2), (Point{1, 0}));
    EXPECT_THROW(canonical_edge(kNN2, {0, 0}, {1, 1}), SpecError);
    EXPECT_THROW(canonical_edge(kNN2, {0, 0}, {0, 0}), SpecError);
    EXPECT_NO_THROW(canonical_edge(Lattice(2, Adjacency::spread_out(1)), {0, 0}, {1, 1}));
}

// Reference values computed from the documented algorithm by a separate script.
TEST(EdgeHash, DocumentedTestVectors) {
    EXPECT_EQ(edge_hash(stream_key(42, 7), Edge{Point{0, 0}, 3}), 0x3379ca2bad7049e2ULL);
    EXPECT_EQ(edge_hash(stream_key(42, 7), Edge{Point{-1, 70}, 2}), 0x7cd3830e8b9fd099ULL);
    EXPECT_EQ(edge_hash(stream_key(1, 0), Edge{Point{3, -2, 5, 0, 0, 0, 0, 0, 0, 0, -9}, 21}), 0x7f9fa9a5c78a352cULL);
    const LatticeConfig cfg(kNN2, 0.5, 42, 7);
    EXPECT_DOUBLE_EQ(edge_state(cfg, {0, 0}, {1, 0}).u, 0.2010771137842663);
}

TEST(EdgeState, ExtremeProbabilities) {
    const LatticeConfig one(kNN2, 1.0, 3), zero(kNN2, 0.0, 3);
    for (const auto& x : enumerate_region(Region::box(3), 2)) {
        for (const auto& y : kNN2.neighbors(x)) {
            EXPECT_TRUE(edge_state(one, x, y).open);
            EXPECT_FALSE(edge_state(zero, x, y).open);
        }
    }
}

TEST(EdgeState, Deterministic) {
    const LatticeConfig cfg(kNN2, 0.5, 42, 7);
    const auto a = edge_state(cfg, {2, 3}, {2, 4});
    const auto b = edge_state(cfg, {2, 4}, {2, 3});
    EXPECT_EQ(a.open, b.open);
    EXPECT_EQ(a.u, b.u);
    EXPECT_NE(a.u, edge_state(cfg.with_replicate(8), {2, 3}, {2, 4}).u);
}

TEST(EdgeState, NonAdjacentRejected) {
    EXPECT_THROW(edge_state(LatticeConfig(kNN2, 0.5, 1), {0, 0}, {2, 0}), SpecError);
}

TEST(EdgeState, MonotoneCouplingInP) {
    const LatticeConfig lo(kNN2, 0.3, 9), hi(kNN2, 0.6, 9);
    for (const auto& x : enumerate_region(Region::box(6), 2))
        for (const auto& y : kNN2.neighbors(x))
            if (edge_state(lo, x, y).open) EXPECT_TRUE(edge_state(hi, x, y).open);
}

TEST(EdgeState, UniformMarginals) {
    // Mean and histogram of u over ~10^5 edges across replicates.
    const LatticeConfig base(Lattice(3, Adjacency::nearest()), 0.5, 2024);
    std::vector<int> hist(10, 0);
    double sum = 0;
    int n = 0;
    for (std::uint64_t r = 0; r < 40; ++r) {
        const LazyBonds bonds(base.with_replicate(r));
        for_each_in_window(Window::cube(3, 4, Point(3)), [&](const Point& x) {
            for (std::size_t k = 3; k < 6; ++k) {
                const double u = bonds.uniform(edge_from(bonds.lattice(), x, k));
                ASSERT_GE(u, 0.0);
                ASSERT_LT(u, 1.0);
                sum += u;
                ++hist[static_cast<std::size_t>(u * 10)];
                ++n;
            }
        });
    }
    EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
    double chi2 = 0;
    for (int h : hist) chi2 += (h - n / 10.0) * (h - n / 10.0) / (n / 10.0);
    EXPECT_LT(chi2, 27.9);  // chi^2_9 upper 0.1% point
}

TEST(EdgeState, NeighbouringEdgesUncorrelated) {
    const LatticeConfig cfg(kNN2, 0.5, 77);
    const LazyBonds bonds(cfg);
    double sxy = 0, sx = 0, sy = 0;
    int n = 0;
    for_each_in_window(Window::cube(2, 60, Point(2)), [&](const Point& x) {
        const double a = bonds.uniform(edge_from(kNN2, x, 3)), b = bonds.uniform(edge_from(kNN2, x, 2));
        sxy += a * b;
        sx += a;
        sy += b;
        ++n;
    });
    const double cov = sxy / n - (sx / n) * (sy / n);
    EXPECT_LT(std::abs(cov / (1.0 / 12)), 4 / std::sqrt(n));
}

TEST(Bonds, LazyAgreesWithEdgeState) {
    const LatticeConfig cfg(kNN2, 0.4, 5, 11);
    const LazyBonds bonds(cfg);
    for (const auto& x : enumerate_region(Region::box(2), 2))
        for (std::size_t k = 0; k < kNN2.degree(); ++k)
            EXPECT_EQ(bonds.open(x, k), edge_state(cfg, x, x + kNN2.offset(k)).open);
}

TEST(Bonds, MaskAndExplicitFields) {
    const std::vector<Edge> edges{canonical_edge(kNN2, {0, 0}, {1, 0}), canonical_edge(kNN2, {0, 0}, {0, 1})};
    MaskBonds mb(kNN2, edges);
    mb.set_mask(0b10);
    EXPECT_FALSE(mb.open({0, 0}, 3));
    EXPECT_TRUE(mb.open({0, 1}, 1));  // (0,1) -> (0,0)
    EXPECT_FALSE(mb.open({5, 5}, 0));

    ExplicitBonds eb(kNN2);
    eb.open_path({{0, 0}, {1, 0}, {1, 1}});
    EXPECT_TRUE(eb.open({1, 1}, 1));
    EXPECT_FALSE(eb.open({0, 0}, 2));

    const FlippedBonds<ExplicitBonds> fb(eb, canonical_edge(kNN2, {0, 0}, {0, 1}));
    EXPECT_TRUE(fb.open({0, 0}, 2));
    EXPECT_TRUE(fb.open({0, 0}, 3));
}
