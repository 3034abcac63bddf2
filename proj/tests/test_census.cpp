#include <gtest/gtest.h>

#include <set>

#include "oracle.hpp"
#include "perclab/census.hpp"
#include "perclab/cluster.hpp"

using namespace perclab;

namespace {
const Lattice kNN2(2, Adjacency::nearest());
}

TEST(UnionFind, Basics) {
    UnionFind uf(6);
    uf.unite(0, 1);
    uf.unite(2, 3);
    uf.unite(1, 3);
    EXPECT_EQ(uf.find(0), uf.find(2));
    EXPECT_NE(uf.find(0), uf.find(4));
}

TEST(Census, AllClosedAndAllOpen) {
    const auto closed = census(LazyBonds(LatticeConfig(kNN2, 0.0, 1)), Region::box(3), 1, 3);
    EXPECT_EQ(closed.cluster_count(), 49u);
    EXPECT_TRUE(closed.spanning_ids.empty());
    // Labels follow lexicographic order of the first member.
    EXPECT_EQ(closed.label_of({-3, -3}), 0);
    EXPECT_EQ(closed.label_of({-3, -2}), 1);
    EXPECT_EQ(closed.label_of({5, 5}), -1);

    const auto open = census(LazyBonds(LatticeConfig(kNN2, 1.0, 1)), Region::box(3), 1, 3);
    EXPECT_EQ(open.cluster_count(), 1u);
    EXPECT_EQ(open.sizes[0], 49u);
    EXPECT_EQ(open.spanning_ids, std::vector<std::int32_t>{0});
}

TEST(Census, AgreesWithExplorerCluster) {
    for (std::uint64_t r = 0; r < 100; ++r) {
        const LazyBonds b(LatticeConfig(kNN2, 0.5, 31, r));
        const auto cen = census(b, Region::box(4), 1, 4);
        std::set<std::int32_t> explored_spanning;
        for (const auto& x : enumerate_region(Region::box(4), 2)) {
            const auto rec = explore_cluster(b, x, Region::box(4), ExplorationCaps::unlimited());
            const auto l = cen.label_of(x);
            EXPECT_EQ(cen.sizes[static_cast<std::size_t>(l)], rec.size());
            for (const auto& y : rec.vertices) EXPECT_EQ(cen.label_of(y), l);
            bool inner = false, outer = false;
            for (const auto& y : rec.vertices) {
                inner = inner || y.norm() <= 1;
                outer = outer || y.norm() == 4;
            }
            if (inner && outer) explored_spanning.insert(l);
        }
        EXPECT_EQ(std::vector<std::int32_t>(explored_spanning.begin(), explored_spanning.end()), cen.spanning_ids);
    }
}

TEST(Census, BudgetEnforced) {
    const LazyBonds b(LatticeConfig(kNN2, 0.5, 1));
    EXPECT_THROW(census(b, Region::box(100), 1, 3, 1000), ResourceError);
    EXPECT_THROW(census(b, Region::lattice(), 1, 3), SpecError);
    EXPECT_THROW(census(b, Region::box(5), 3, 1), SpecError);
}

TEST(SpanningStats, FullyOpenBox) {
    const LazyBonds b(LatticeConfig(kNN2, 1.0, 1));
    const std::int64_t n = 2;
    const auto cen = census(b, Region::box(5.0 * n), n, 3 * n);
    const auto st = spanning_cluster_stats(cen, b, n);
    ASSERT_EQ(st.size(), 1u);
    EXPECT_EQ(st[0].x_count, 32u);                   // |dB(4)| = 9^2 - 7^2
    EXPECT_EQ(st[0].ball_volume, 21u * 21u);         // |B(10)|
    EXPECT_EQ(st[0].outer_volume, 21u * 21u - 13u * 13u);
}

TEST(SpanningStats, MisuseRejected) {
    const LazyBonds b(LatticeConfig(kNN2, 1.0, 1));
    const auto wrong = census(b, Region::box(8), 2, 6);
    EXPECT_THROW(spanning_cluster_stats(wrong, b, 2), SpecError);
    const auto shifted = census(b, Region::box(10).shifted(Point{1, 0}), 2, 6);
    EXPECT_THROW(spanning_cluster_stats(shifted, b, 2), SpecError);
}

TEST(SpanningStats, XCountMatchesDirectDefinition) {
    const std::int64_t n = 2;
    for (std::uint64_t r = 0; r < 40; ++r) {
        const LazyBonds b(LatticeConfig(kNN2, 0.55, 5, r));
        const auto cen = census(b, Region::box(5.0 * n), n, 3 * n);
        const auto stats = spanning_cluster_stats(cen, b, n);
        for (const auto& st : stats) {
            std::uint64_t want = 0, vol = 0;
            for (const auto& x : enumerate_region(Region::box(5.0 * n), 2)) {
                if (cen.label_of(x) != st.id) continue;
                ++vol;
                // a path from dB(2n) into B(n) must cross dB(n) first
                if (x.norm() == 2 * n && connected(b, x, Boundary::sphere(static_cast<double>(n)), Region::box(2.0 * n)).connected)
                    ++want;
            }
            EXPECT_EQ(st.x_count, want);
            EXPECT_EQ(st.ball_volume, vol);
        }
    }
}

TEST(SpanningStats, RegularFamilyThresholds) {
    SpanningClusterStats st{0, 4, 16, 16};
    EXPECT_TRUE(in_regular_family(st, 2, 1.0));
    st.x_count = 3;
    EXPECT_FALSE(in_regular_family(st, 2, 1.0));
    EXPECT_TRUE(in_regular_family(st, 2, 0.5));
    st = {0, 4, 16, 33};
    EXPECT_FALSE(in_regular_family(st, 2, 0.5));
    EXPECT_EQ(count_regular({{0, 4, 16, 16}, {1, 0, 0, 1}}, 2, 1.0), 1u);
}
