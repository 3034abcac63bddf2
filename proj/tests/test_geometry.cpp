#include <gtest/gtest.h>

#include <random>
#include <set>

#include "perclab/lattice.hpp"
#include "perclab/region.hpp"

using namespace perclab;

namespace {

const Lattice kNN2(2, Adjacency::nearest());

std::vector<Region> sample_regions() {
    return {Region::box(2),           Region::half_box(3),          Region::rect(1),
            Region::reflected_box(2), Region::annulus(1, 3),        Region::shifted_annulus(1, 3),
            Region::half_annulus(1, 3), Region::annulus(0, 1),      Region::box(1).shifted({1, -2}),
            Region::product({{-1, 2}, {0, 0}})};
}

} // namespace

TEST(Neighbors, NearestNeighbourOrderIsLexicographic) {
    const auto nb = neighbors(Point{0, 0}, kNN2);
    const std::vector<Point> want{{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
    EXPECT_EQ(nb, want);
}

TEST(Neighbors, SpreadOutMooreNeighbourhood) {
    const Lattice lat(2, Adjacency::spread_out(1));
    const auto nb = lat.neighbors(Point{0, 0});
    EXPECT_EQ(nb.size(), 8u);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
}

TEST(Neighbors, ElevenDimensions) {
    const Lattice lat(11, Adjacency::nearest());
    EXPECT_EQ(lat.neighbors(Point(11)).size(), 22u);
    EXPECT_EQ(Lattice(3, Adjacency::spread_out(2)).degree(), 124u);
}

TEST(Neighbors, DimensionMismatchThrows) { EXPECT_THROW(kNN2.neighbors(Point{0, 0, 0}), SpecError); }

TEST(Neighbors, Symmetric) {
    for (const auto& lat : {Lattice(3, Adjacency::nearest()), Lattice(2, Adjacency::spread_out(2))}) {
        const Point x{1, -2, 0};
        const Point x2 = lat.dim() == 3 ? x : Point{1, -2};
        for (const auto& y : lat.neighbors(x2)) {
            const auto back = lat.neighbors(y);
            EXPECT_NE(std::find(back.begin(), back.end(), x2), back.end());
        }
    }
}

TEST(Neighbors, OffsetIndexInvertsOffsets) {
    for (const auto& lat : {Lattice(4, Adjacency::nearest()), Lattice(3, Adjacency::spread_out(2))}) {
        for (std::size_t k = 0; k < lat.degree(); ++k) {
            EXPECT_EQ(lat.offset_index(lat.offset(k)), k);
            EXPECT_EQ(lat.offset(lat.opposite(k)), -lat.offset(k));
        }
        EXPECT_EQ(lat.offset_index(Point(lat.dim())), lat.degree());
    }
}

TEST(RegionContains, HalfBox) {
    const auto bh = Region::half_box(3);
    EXPECT_TRUE(bh.contains({0, -3}));
    EXPECT_FALSE(bh.contains({-1, 0}));
}

TEST(RegionContains, ShiftedAnnulusExcludesReflectedBox) {
    const auto a = Region::shifted_annulus(2, 8);
    EXPECT_FALSE(a.contains({-2, 0}));
    EXPECT_FALSE(a.contains({-3, 2}));
    EXPECT_TRUE(a.contains({-4, 0}));
    EXPECT_TRUE(a.contains({0, 0}));
    EXPECT_TRUE(a.contains({-1, 3}));
}

TEST(RegionContains, Rect) {
    const auto r = Region::rect(2);
    EXPECT_TRUE(r.contains({2, 8, -8}));
    EXPECT_FALSE(r.contains({3, 0, 0}));
    EXPECT_FALSE(r.contains({-1, 0, 0}));
}

TEST(RegionContains, ShiftTestsTranslatedPoint) {
    const auto r = Region::box(1).shifted({5, 5});
    EXPECT_TRUE(r.contains({6, 4}));
    EXPECT_FALSE(r.contains({0, 0}));
    EXPECT_EQ(r.shifted({-5, -5}), Region::box(1));
}

TEST(RelativeBoundary, BoxInBox) {
    const auto b = relative_boundary(Region::box(1), Region::box(2), Adjacency::nearest());
    EXPECT_TRUE(b.contains({1, 1}));
    EXPECT_TRUE(b.contains({1, 0}));
    EXPECT_FALSE(b.contains({0, 0}));
    EXPECT_FALSE(b.contains({2, 0}));
}

TEST(RelativeBoundary, EqualSetsHaveEmptyBoundary) {
    const auto b = relative_boundary(Region::box(2), Region::box(2), Adjacency::nearest());
    for (const auto& x : enumerate_region(Region::box(3), 2)) EXPECT_FALSE(b.contains(x));
}

TEST(RelativeBoundary, HalfBoxInHalfSpace) {
    const auto b = relative_boundary(Region::half_box(1), Region::half_space(), Adjacency::nearest());
    EXPECT_FALSE(b.contains({0, 0}));
    EXPECT_TRUE(b.contains({1, 0}));
    EXPECT_TRUE(b.contains({0, 1}));
}

TEST(RelativeBoundary, ViolationOfNestingReported) {
    const auto b = relative_boundary(Region::box(2), Region::box(1), Adjacency::nearest());
    EXPECT_THROW(b.contains({2, 0}), SpecError);
    EXPECT_FALSE(b.contains({5, 0}));
}

TEST(Enumerate, BoxCardinalities) {
    EXPECT_EQ(enumerate_region(Region::box(1), 2).size(), 9u);
    EXPECT_EQ(count_members(Region::box(2), 3), 125u);
    EXPECT_EQ(enumerate_region(Region::annulus(0, 1), 2).size(), 8u);
    EXPECT_EQ(count_members(Region::half_box(2), 2), 15u);
    EXPECT_EQ(count_members(Region::rect(1), 2), 18u);
}

TEST(Enumerate, HalfSphere) {
    const auto pts = enumerate_region(Boundary::half_sphere(1), 2);
    const std::vector<Point> want{{0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
    EXPECT_EQ(pts, want);
}

TEST(Enumerate, UnboundedThrows) {
    EXPECT_THROW(enumerate_region(Region::lattice(), 2), SpecError);
    EXPECT_THROW(enumerate_region(Region::half_space(), 2), SpecError);
    EXPECT_THROW(enumerate_region(Boundary::plane(1), 2), SpecError);
}

TEST(Enumerate, FloorConvention) {
    EXPECT_EQ(enumerate_region(Region::box(3.5), 2), enumerate_region(Region::box(3), 2));
    EXPECT_EQ(Region::shifted_annulus(0.5, 4), Region::shifted_annulus(0, 4));
    EXPECT_EQ(Region::parse("B(n=3.5)"), Region::box(3));
}

TEST(RegionProperties, ContainsMatchesEnumeration) {
    for (std::size_t d : {1u, 2u, 3u}) {
        for (const auto& r : sample_regions()) {
            if (r.kind() == Region::Kind::product && d != 2) continue;
            if (r.shift() && d != 2) continue;
            std::set<Point> members;
            for (const auto& x : enumerate_region(r, d)) EXPECT_TRUE(members.insert(x).second) << r.to_string();
            EXPECT_TRUE(std::is_sorted(members.begin(), members.end()));
            for_each_in_window(Window::cube(d, 10, Point(d)), [&](const Point& x) {
                EXPECT_EQ(r.contains(x), members.contains(x)) << r.to_string() << " " << x;
            });
        }
    }
}

TEST(RegionProperties, SetAlgebraIdentities) {
    for (int m = 0; m <= 3; ++m) {
        for (int n = m; n <= 5; ++n) {
            for_each_in_window(Window::cube(2, 7, Point(2)), [&](const Point& x) {
                EXPECT_EQ(Region::annulus(m, n).contains(x), Region::box(n).contains(x) && !Region::box(m).contains(x));
                EXPECT_EQ(Region::half_annulus(m, n).contains(x),
                          Region::half_box(n).contains(x) && !Region::half_box(m).contains(x));
                EXPECT_EQ(Region::shifted_annulus(m, n).contains(x),
                          Region::box(n).contains(x) && !Region::reflected_box(m).contains(x));
                // Bminus(m) = -e1 - BH(m)
                Point y = -x;
                y[0] -= 1;
                EXPECT_EQ(Region::reflected_box(m).contains(x), Region::half_box(m).contains(y));
            });
        }
    }
}

TEST(BoundaryProperties, AnnulusBoundaries) {
    for (int m = 0; m <= 2; ++m) {
        for (int n = m + 1; n <= 4; ++n) {
            const auto outer_h = Boundary::outer(Region::half_annulus(m, n));
            const auto inner_a = Boundary::inner(Region::annulus(m, n));
            const auto inner_p = Boundary::inner(Region::shifted_annulus(m, n));
            const auto dbh = relative_boundary(Region::half_box(m + 1), Region::lattice(), Adjacency::nearest());
            for_each_in_window(Window::cube(3, 6, Point(3)), [&](const Point& x) {
                EXPECT_EQ(outer_h.contains(x), Boundary::half_sphere(n).contains(x));
                EXPECT_EQ(inner_a.contains(x), x.norm() == m + 1);
                Point y = -x;
                y[0] -= 1;
                EXPECT_EQ(inner_p.contains(x), dbh.contains(y)) << x;
            });
        }
    }
    EXPECT_EQ(Boundary::outer(Region::shifted_annulus(1, 4)), Boundary::sphere(4));
    EXPECT_EQ(Boundary::outer(Region::half_box(4)), Boundary::half_sphere(4));
}

TEST(BoundaryProperties, SphereIsRelativeBoundaryOfBox) {
    const auto rel = relative_boundary(Region::box(3), Region::lattice(), Adjacency::nearest());
    for_each_in_window(Window::cube(2, 5, Point(2)), [&](const Point& x) {
        EXPECT_EQ(rel.contains(x), Boundary::sphere(3).contains(x));
    });
}

TEST(TextForm, CanonicalStringsRoundTrip) {
    for (const std::string s : {"Z", "Zplus(n=2)", "B(n=3)", "BH(n=0)", "Rect(n=8)+shift(1,0,0)", "Bminus(n=2)",
                                "Ann(m=1,n=4)", "AnnP(m=2,n=8)", "AnnH(m=4,n=12)", "Box([0,3]x[-1,1])",
                                "B(n=2)+shift(-3,4)"}) {
        EXPECT_EQ(Region::parse(s).to_string(), s);
    }
    for (const std::string s : {"dB(n=2)", "S(n=3)", "Sp(n=1)", "dBminus(n=2)+shift(0,1)",
                                "rel(BH(n=1);Zplus(n=0);nn)", "rel(B(n=1);B(n=2);so(L=2))"}) {
        EXPECT_EQ(Boundary::parse(s).to_string(), s);
    }
}

TEST(TextForm, RandomRegionsRoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> pick(0, 9), par(-2, 9), coord(-5, 5);
    for (int trial = 0; trial < 2000; ++trial) {
        const int m = std::abs(par(rng)), n = m + std::abs(par(rng));
        Region r = Region::lattice();
        switch (pick(rng)) {
        case 0: r = Region::lattice(); break;
        case 1: r = Region::half_space(par(rng)); break;
        case 2: r = Region::box(n); break;
        case 3: r = Region::half_box(n); break;
        case 4: r = Region::rect(n); break;
        case 5: r = Region::reflected_box(n); break;
        case 6: r = Region::annulus(m, n); break;
        case 7: r = Region::shifted_annulus(m, n); break;
        case 8: r = Region::half_annulus(m, n); break;
        default: r = Region::product({{-m, n}, {m, n}, {0, 1}}); break;
        }
        if (trial % 3 == 0) r = r.shifted({coord(rng), coord(rng), coord(rng)});
        EXPECT_EQ(Region::parse(r.to_string()), r) << r.to_string();
        const auto b = Boundary::relative(r, Region::lattice(), Adjacency::nearest());
        EXPECT_EQ(Boundary::parse(b.to_string()), b);
    }
}

TEST(TextForm, MalformedInputRejected) {
    for (const std::string s : {"", "B", "B(3)", "B(n=)", "Ann(n=3)", "Q(n=1)", "B(n=1)x", "Box([0,1)"})
        EXPECT_THROW(Region::parse(s), SpecError) << s;
    EXPECT_THROW(Boundary::parse("custom(foo)"), SpecError);
}
