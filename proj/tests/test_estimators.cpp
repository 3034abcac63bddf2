#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracle.hpp"
#include "perclab/estimators.hpp"
#include "perclab/exact.hpp"

using namespace perclab;

namespace {
const Lattice kNN1(1, Adjacency::nearest());
const Lattice kNN2(2, Adjacency::nearest());
constexpr std::uint64_t kSeed = 20240917;

std::vector<Edge> b1_edges() { return oracle::canonical_edges(oracle::b1_graph(), kNN2); }

void expect_within(const EstimateRecord& r, double exact, double k = 3.0) {
    EXPECT_EQ(r.truncation_rate, 0.0) << r.quantity;
    const double se = std::max(r.stderr_, 1e-12);
    EXPECT_LE(std::abs(r.estimate - exact), k * se) << r.quantity << " estimate " << r.estimate << " exact " << exact;
}

double oracle_prob(double p, const std::function<bool(const oracle::Graph&, const std::vector<bool>&)>& ev) {
    const auto g = oracle::b1_graph();
    return static_cast<double>(oracle::enumerate(g, p, [&](const std::vector<bool>& open) { return ev(g, open) ? 1.0 : 0.0; }));
}

bool reaches(const oracle::Graph& g, const std::vector<bool>& open, const Point& a, const Point& b) {
    return oracle::reach(g, g.index(a), open)[static_cast<std::size_t>(g.index(b))];
}
} // namespace

// --- one arm ------------------------------------------------------------------------------

TEST(OneArm, TrivialCases) {
    EXPECT_EQ(est_one_arm(LatticeConfig(kNN2, 0.5, kSeed), 0, 500).estimate, 1.0);
    EXPECT_EQ(est_one_arm(LatticeConfig(kNN2, 0.0, kSeed), 3, 500).estimate, 0.0);
}

TEST(OneArm, ExactTwinAndMonteCarlo) {
    const double want = oracle_prob(0.5, [](const oracle::Graph& g, const std::vector<bool>& open) {
        const auto seen = oracle::reach(g, g.index({0, 0}), open);
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen[i] && g.verts[i].norm() == 1) return true;
        return false;
    });
    EXPECT_NEAR(want, 0.9375, 1e-15);
    const auto exact = enumerate_exact(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) { return sample::one_arm(b, 1).value > 0; });
    EXPECT_NEAR(static_cast<double>(exact), want, 1e-15);
    expect_within(est_one_arm(LatticeConfig(kNN2, 0.5, kSeed), 1, 20000), 0.9375);
}

TEST(OneArm, NestedInScalePerConfiguration) {
    for (std::uint64_t r = 0; r < 2000; ++r) {
        const LazyBonds b(LatticeConfig(kNN2, 0.5, kSeed, r));
        double prev = 1.0;
        for (std::int64_t n = 0; n <= 6; ++n) {
            const double v = sample::one_arm(b, n).value;
            EXPECT_LE(v, prev);
            prev = v;
        }
    }
}

// --- half-space arm ------------------------------------------------------------------------

TEST(HalfSpaceArm, UndirectedExactAndMonteCarlo) {
    const auto exact = enumerate_exact(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) {
        return sample::half_space_arm(b, 1, HalfArmVariant::undirected).value > 0;
    });
    EXPECT_NEAR(static_cast<double>(exact), 0.875, 1e-15);
    expect_within(est_half_space_arm(LatticeConfig(kNN2, 0.5, kSeed), 1, HalfArmVariant::undirected, 20000), 0.875);
}

TEST(HalfSpaceArm, FullyOpen) {
    const LatticeConfig cfg(kNN2, 1.0, kSeed);
    for (const auto v : {HalfArmVariant::undirected, HalfArmVariant::directed, HalfArmVariant::directed_top_count})
        EXPECT_EQ(est_half_space_arm(cfg, 3, v, 50, 0.1).estimate, 1.0);
    // the top of Rect(3) in Z^2 has 25 points; 25 > c * 9 fails once c >= 25/9
    EXPECT_EQ(est_half_space_arm(cfg, 3, HalfArmVariant::directed_top_count, 10, 2.8).estimate, 0.0);
}

TEST(HalfSpaceArm, UndirectedDominatesDirected) {
    const Lattice lat3(3, Adjacency::nearest());
    for (std::uint64_t r = 0; r < 3000; ++r) {
        const LazyBonds b(LatticeConfig(r % 2 ? kNN2 : lat3, 0.5, kSeed, r));
        for (std::int64_t n : {1, 2, 4}) {
            const double u = sample::half_space_arm(b, n, HalfArmVariant::undirected).value;
            const double d = sample::half_space_arm(b, n, HalfArmVariant::directed).value;
            const double t = sample::half_space_arm(b, n, HalfArmVariant::directed_top_count, 0.2).value;
            EXPECT_GE(u, d);
            EXPECT_GE(d, t);
        }
    }
}

// --- two point -----------------------------------------------------------------------------

TEST(TwoPoint, SamePointIsOne) {
    EXPECT_EQ(est_two_point(LatticeConfig(kNN2, 0.1, kSeed), {2, 2}, {2, 2}, Region::lattice(), 100).estimate, 1.0);
}

TEST(TwoPoint, LineGraphPowerLaw) {
    for (const double p : {0.3, 0.7}) {
        const LatticeConfig cfg(kNN1, p, kSeed);
        for (int k = 1; k <= 6; ++k) expect_within(est_two_point(cfg, Point{0}, Point{k}, Region::box(10), 20000), std::pow(p, k));
    }
}

TEST(TwoPoint, UnitBoxExactTwin) {
    for (const double p : {0.3, 0.5}) {
        const double want = oracle_prob(p, [](const oracle::Graph& g, const std::vector<bool>& open) {
            return reaches(g, open, {0, 0}, {1, 0});
        });
        const auto exact = enumerate_exact(kNN2, b1_edges(), p, [](const MaskBonds& b) {
            return sample::two_point(b, Point{0, 0}, Point{1, 0}, Region::box(1), {}).value > 0;
        });
        EXPECT_NEAR(static_cast<double>(exact), want, 1e-14);
        expect_within(est_two_point(LatticeConfig(kNN2, p, kSeed), {0, 0}, {1, 0}, Region::box(1), 20000), want);
    }
}

TEST(TwoPoint, RegionNestingAndSwapSymmetry) {
    const Point x{0, 0}, y{2, 1};
    for (std::uint64_t r = 0; r < 3000; ++r) {
        const LazyBonds b(LatticeConfig(kNN2, 0.5, kSeed, r));
        const double small = sample::two_point(b, x, y, Region::half_box(3), {}).value;
        const double mid = sample::two_point(b, x, y, Region::box(3), {}).value;
        const double big = sample::two_point(b, x, y, Region::box(6), {}).value;
        EXPECT_LE(small, mid);
        EXPECT_LE(mid, big);
        EXPECT_EQ(big, sample::two_point(b, y, x, Region::box(6), {}).value);
    }
}

TEST(TwoPoint, UnboundedRegionUsesWindowAndReportsTruncation) {
    const auto rec = est_two_point(LatticeConfig(kNN2, 1.0, kSeed), {0, 0}, {1, 0}, Region::lattice(), 10);
    EXPECT_EQ(rec.estimate, 1.0);
    const auto caps = two_point_caps(Region::lattice(), Point{0, 0}, Point{3, 1});
    EXPECT_EQ(caps.max_radius, std::optional<std::int64_t>(12));
    EXPECT_THROW(est_two_point(LatticeConfig(kNN2, 0.5, 1), {0, 0}, {-1, 0}, Region::half_space(), 10), SpecError);
}

// --- corner arm ----------------------------------------------------------------------------

TEST(CornerArm, ExactTwinAndTrivia) {
    const LatticeConfig open(kNN2, 1.0, kSeed);
    EXPECT_EQ(est_corner_arm(open, 4, 20).estimate, 1.0);
    EXPECT_EQ(est_corner_arm(LatticeConfig(kNN2, 0.2, kSeed), 0, 20).estimate, 1.0);
    const double want = oracle_prob(0.5, [](const oracle::Graph& g, const std::vector<bool>& open) {
        return reaches(g, open, {0, 0}, {1, 1});
    });
    const auto exact = enumerate_exact(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) { return sample::corner_arm(b, 1).value > 0; });
    EXPECT_NEAR(static_cast<double>(exact), want, 1e-15);
    expect_within(est_corner_arm(LatticeConfig(kNN2, 0.5, kSeed), 1, 20000), want);
}

// --- cluster tail --------------------------------------------------------------------------

TEST(ClusterTail, Trivia) {
    EXPECT_EQ(est_cluster_tail(LatticeConfig(kNN2, 0.0, kSeed), 1, Region::lattice(), 100).estimate, 0.0);
    EXPECT_EQ(est_cluster_tail(LatticeConfig(kNN2, 0.3, kSeed), 0, Region::lattice(), 100).estimate, 1.0);
    // p = 1 on the full lattice: the early exit keeps this finite
    EXPECT_EQ(est_cluster_tail(LatticeConfig(kNN2, 1.0, kSeed), 1000, Region::lattice(), 5).estimate, 1.0);
}

TEST(ClusterTail, HalfLineHasOneAdmissibleEdge) {
    expect_within(est_cluster_tail(LatticeConfig(kNN1, 0.5, kSeed), 1, Region::half_space(), 20000), 0.5);
    // t = 2 on the half-line needs both (0,1) and (1,2): p^2
    expect_within(est_cluster_tail(LatticeConfig(kNN1, 0.5, kSeed), 2, Region::half_space(), 20000), 0.25);
}

// --- restricted moments --------------------------------------------------------------------

TEST(Moments, TriviaAndExactTwin) {
    EXPECT_EQ(est_restricted_moments(LatticeConfig(kNN2, 0.0, kSeed), 3, 1, Region::lattice(), 50).estimate, 1.0);
    EXPECT_EQ(est_restricted_moments(LatticeConfig(kNN2, 1.0, kSeed), 1, 1, Region::box(1), 50).estimate, 9.0);
    const auto g = oracle::b1_graph();
    for (const int order : {1, 2}) {
        const double want = static_cast<double>(oracle::enumerate(g, 0.5, [&](const std::vector<bool>& open) {
            const auto seen = oracle::reach(g, g.index({0, 0}), open);
            double c = 0;
            for (bool s : seen) c += s ? 1 : 0;
            return order == 1 ? c : c * c;
        }));
        const auto exact = exact_expectation(kNN2, b1_edges(), 0.5, [&](const MaskBonds& b) {
            return sample::restricted_moment(b, 1, order, Region::box(1), {}).value;
        });
        EXPECT_NEAR(static_cast<double>(exact), want, 1e-12);
        expect_within(est_restricted_moments(LatticeConfig(kNN2, 0.5, kSeed), 1, order, Region::box(1), 20000), want);
    }
}

// --- X_Q distribution ----------------------------------------------------------------------

TEST(XQ, PointMasses) {
    const auto closed = est_xq_distribution(LatticeConfig(kNN2, 0.0, kSeed), Region::box(2), Boundary::sphere(2), {0, 0}, 50);
    ASSERT_EQ(closed.bins.size(), 1u);
    EXPECT_EQ(closed.bins.at(0).estimate, 1.0);
    const auto open = est_xq_distribution(LatticeConfig(kNN2, 1.0, kSeed), Region::half_box(1), Boundary::half_sphere(1), {0, 0}, 50);
    ASSERT_EQ(open.bins.size(), 1u);
    EXPECT_EQ(open.bins.at(5).estimate, 1.0);
    EXPECT_EQ(open.mean.estimate, 5.0);
}

TEST(XQ, HistogramMatchesEnumeration) {
    const auto exact = exact_distribution(kNN2, b1_edges(), 0.5, [](const MaskBonds& b) {
        return boundary_count(b, Region::box(1), Boundary::sphere(1), Point{0, 0}).count;
    });
    const auto mc = est_xq_distribution(LatticeConfig(kNN2, 0.5, kSeed), Region::box(1), Boundary::sphere(1), {0, 0}, 20000);
    for (const auto& [k, prob] : exact) {
        ASSERT_TRUE(mc.bins.contains(k)) << "X = " << k;
        expect_within(mc.bins.at(k), static_cast<double>(prob));
    }
    for (const auto& [k, rec] : mc.bins) EXPECT_TRUE(exact.contains(k));
}

// --- regular census ------------------------------------------------------------------------

namespace {
/// Spanning-cluster regularity computed cluster by cluster with the explorer.
std::uint64_t regular_by_exploration(const LazyBonds& b, std::int64_t n, double eta) {
    const Region big = Region::box(5.0 * n);
    std::set<Point> seen_roots;
    std::uint64_t count = 0;
    for (const auto& x : enumerate_region(Region::box(static_cast<double>(n)), b.lattice().dim())) {
        const auto c = explore_cluster(b, x, big, ExplorationCaps::unlimited());
        if (!seen_roots.insert(c.vertices.front()).second) continue;
        bool spans = false;
        for (const auto& v : c.vertices) spans = spans || v.norm() == 3 * n;
        if (!spans) continue;
        double xc = 0, outer = 0, ball = 0;
        for (const auto& v : c.vertices) {
            ball += 1;
            if (v.norm() > 3 * n) outer += 1;
            if (v.norm() == 2 * n &&
                connected(b, v, Boundary::sphere(static_cast<double>(n)), Region::box(2.0 * n)).connected)
                xc += 1;
        }
        const double n2 = static_cast<double>(n * n);
        if (xc >= eta * n2 && outer >= eta * n2 * n2 && ball <= n2 * n2 / eta) ++count;
    }
    return count;
}
} // namespace

TEST(RegularCensus, Trivia) {
    const auto closed = est_regular_census(LatticeConfig(kNN2, 0.0, kSeed), 2, 0.1, 20);
    EXPECT_EQ(closed.mean.estimate, 0.0);
    // eta n^2 = 400 > #dB(4) = 32
    const auto huge = est_regular_census(LatticeConfig(kNN2, 0.6, kSeed), 2, 100.0, 20);
    EXPECT_EQ(huge.mean.estimate, 0.0);
    EXPECT_EQ(huge.probability.estimate, 0.0);
}

TEST(RegularCensus, AgreesWithClusterExploration) {
    double a = 0, b = 0;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        const LatticeConfig cfg(kNN2, 0.5, kSeed, r);
        const LazyBonds bonds(cfg);
        const double via_census = sample::regular_census(bonds, 2, 0.1).value;
        const double via_explore = static_cast<double>(regular_by_exploration(bonds, 2, 0.1));
        EXPECT_EQ(via_census, via_explore) << "replicate " << r;
        a += via_census;
        b += via_explore;
    }
    EXPECT_EQ(a, b);
    EXPECT_GT(a, 0.0);
    const auto est = est_regular_census(LatticeConfig(kNN2, 0.5, kSeed), 2, 0.1, 1000);
    EXPECT_DOUBLE_EQ(est.mean.estimate, a / 1000);
}

// --- mass transport ------------------------------------------------------------------------

TEST(Transport, ClosedConfigurationSendsNothing) {
    const auto audit = mass_transport_audit(LatticeConfig(kNN2, 0.0, kSeed), 2, 50);
    EXPECT_EQ(audit.send.estimate, 0.0);
    EXPECT_EQ(audit.get.estimate, 0.0);
    EXPECT_EQ(audit.z_combined, 0.0);
}

TEST(Transport, ExactIdentityOnTheLine) {
    // In d = 1 every edge either rule reads lies in [-7n, 4n]; both expectations are
    // polynomials in p and must coincide coefficient by coefficient.
    for (const std::int64_t n : {1, 2}) {
        std::vector<Edge> edges;
        for (std::int64_t i = -7 * n; i < 4 * n; ++i)
            edges.push_back(canonical_edge(kNN1, Point{static_cast<Coord>(i)}, Point{static_cast<Coord>(i + 1)}));
        const auto send = exact_sum(kNN1, edges, [&](const MaskBonds& b) { return static_cast<double>(sample::transport_send(b, n)); });
        const auto get = exact_sum(kNN1, edges, [&](const MaskBonds& b) { return static_cast<double>(sample::transport_get(b, n)); });
        EXPECT_EQ(send.coeff, get.coeff) << "n = " << n;
        EXPECT_GT(send.at(0.5), 0.0);
    }
}

TEST(Transport, SendMatchesBruteForceOnTheLine) {
    // n = 1: Ann'(0,4) = [-4,4] minus {-1}; Ann_H(1,3) = {2,3}.
    std::vector<Point> verts;
    for (int i = -4; i <= 4; ++i)
        if (i != -1) verts.push_back(Point{i});
    const auto g = oracle::nn_graph(verts);
    for (std::uint64_t r = 0; r < 500; ++r) {
        const LatticeConfig cfg(kNN1, 0.6, kSeed, r);
        const auto seen = oracle::reach(g, g.index(Point{0}), oracle::realized_states(g, cfg));
        std::uint64_t want = 0;
        for (std::size_t i = 0; i < seen.size(); ++i) want += (seen[i] && (g.verts[i][0] == 2 || g.verts[i][0] == 3)) ? 1 : 0;
        EXPECT_EQ(sample::transport_send(LazyBonds(cfg), 1), want);
    }
}

TEST(Transport, GetBoundedByUnrestrictedConnections) {
    const std::int64_t n = 2;
    const Region sources = Region::half_annulus(2, 6);
    for (std::uint64_t r = 0; r < 300; ++r) {
        const LazyBonds b(LatticeConfig(kNN2, 0.45, kSeed, r));
        const auto c = explore_cluster(b, Point{0, 0}, Region::box(30), ExplorationCaps::unlimited());
        std::uint64_t bound = 0;
        for (const auto& v : c.vertices) bound += sources.contains(-v) ? 1 : 0;
        EXPECT_LE(sample::transport_get(b, n), bound);
    }
}

TEST(Transport, MonteCarloIdentity) {
    const auto audit = mass_transport_audit(LatticeConfig(kNN2, 0.4, kSeed), 2, 10000);
    EXPECT_LE(std::abs(audit.z_combined), 3.0);
    EXPECT_LE(std::abs(audit.z_paired), 3.0);
    EXPECT_GT(audit.send.estimate, 0.0);
}

// --- s-bad ---------------------------------------------------------------------------------

namespace {
/// For s = 2 the regularity threshold is below 2, so T_2(z) holds iff z has no open edge
/// at all. Given C = C_{B(1)}(z), the chance of that is 1{C = {z}} (1-p)^(edges of z leaving B(1)).
double sbad_oracle(double p, const Point& z, bool conditional_mean) {
    const auto g = oracle::b1_graph();
    int leaving = 0;
    for (const auto& y : kNN2.neighbors(z)) leaving += y.norm() > 1 ? 1 : 0;
    const double thr = 1 - std::exp(-std::log(2.0) * std::log(2.0));
    return static_cast<double>(oracle::enumerate(g, p, [&](const std::vector<bool>& open) {
        const auto seen = oracle::reach(g, g.index(z), open);
        int size = 0;
        for (bool s : seen) size += s ? 1 : 0;
        const double cond = size == 1 ? std::pow(1 - p, leaving) : 0.0;
        return conditional_mean ? cond : (cond <= thr ? 1.0 : 0.0);
    }));
}
} // namespace

TEST(Sbad, Trivia) {
    const auto closed = est_sbad_rate(LatticeConfig(kNN2, 0.0, kSeed), Region::box(1), {1, 0}, 2, 5, 20);
    EXPECT_EQ(closed.rate.estimate, 0.0);
    EXPECT_EQ(closed.conditional_mean.estimate, 1.0);
    const auto open = est_sbad_rate(LatticeConfig(kNN2, 1.0, kSeed), Region::box(1), {1, 0}, 2, 5, 20);
    EXPECT_EQ(open.rate.estimate, 1.0);
    EXPECT_THROW(est_sbad_rate(LatticeConfig(kNN2, 0.5, kSeed), Region::box(1), {0, 0}, 2, 5, 2), SpecError);
}

TEST(Sbad, NestedMonteCarloMatchesExactConditioning) {
    ASSERT_LT(regularity_threshold(2), 2.0);
    struct Case {
        double p;
        Point z;
    };
    for (const auto& c : {Case{0.5, {1, 0}}, Case{0.3, {1, 0}}, Case{0.5, {1, 1}}}) {
        const double rate = sbad_oracle(c.p, c.z, false), mean = sbad_oracle(c.p, c.z, true);
        const auto est = est_sbad_rate(LatticeConfig(kNN2, c.p, kSeed), Region::box(1), c.z, 2, 150, 2000);
        // the inner average misclassifies a draw with chance below 1e-3 here
        EXPECT_LE(std::abs(est.rate.estimate - rate), 3 * std::max(est.rate.stderr_, 1e-3)) << c.z.to_string();
        expect_within(est.conditional_mean, mean);
    }
    EXPECT_NEAR(sbad_oracle(0.5, {1, 0}, false), 0.875, 1e-15);
}

// --- FKG ----------------------------------------------------------------------------------

TEST(Fkg, PositiveCorrelationByEnumeration) {
    const auto edges = b1_edges();
    const auto targets = enumerate_region(Region::annulus(0, 1), 2);
    const auto conn = [](const MaskBonds& m, const Point& t) { return connected(m, Point{0, 0}, t, Region::box(1)).connected; };
    std::vector<ExactPolynomial> single;
    for (const auto& a : targets) single.push_back(exact_sum(kNN2, edges, [&](const MaskBonds& m) { return conn(m, a) ? 1.0 : 0.0; }));
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = 0; j < targets.size(); ++j) {
            const auto both = exact_sum(kNN2, edges, [&](const MaskBonds& m) {
                return conn(m, targets[i]) && conn(m, targets[j]) ? 1.0 : 0.0;
            });
            for (int k = 1; k <= 9; ++k) {
                const long double p = k / 10.0L;
                EXPECT_GE(both.at(p) + 1e-15L, single[i].at(p) * single[j].at(p))
                    << targets[i].to_string() << " " << targets[j].to_string() << " p=" << static_cast<double>(p);
            }
        }
}

// --- determinism and serialization ---------------------------------------------------------

TEST(Determinism, WorkerCountDoesNotMatter) {
    const LatticeConfig cfg(kNN2, 0.5, kSeed);
    const RunOptions one{0, 1, 256}, eight{0, 8, 256};
    EXPECT_EQ(est_one_arm(cfg, 4, 3000, one), est_one_arm(cfg, 4, 3000, eight));
    const auto plan = plan_restricted_moment(3, 2, Region::box(3));
    EXPECT_EQ(run_plan(plan, cfg, 3000, one), run_plan(plan, cfg, 3000, eight));
}

TEST(Determinism, ReplicateOffsetSelectsStreams) {
    const LatticeConfig cfg(kNN2, 0.5, kSeed);
    const auto plan = plan_one_arm(3);
    auto first = run_plan(plan, cfg, 1000, {0, 1, 100});
    const auto second = run_plan(plan, cfg, 1000, {1000, 1, 100});
    first.merge(second);
    EXPECT_EQ(first, run_plan(plan, cfg, 2000, {0, 1, 100}));
}

TEST(Serialization, JsonAndCsvRoundTrip) {
    auto rec = est_two_point(LatticeConfig(kNN2, 0.3, kSeed), {0, 0}, {1, 1}, Region::box(2), 777);
    rec.sum = 0.1 + 0.2;
    rec.stderr_ = 1.0 / 3.0;
    EXPECT_EQ(record_from_json(nlohmann::json::parse(to_jsonl(rec))), rec);
    EXPECT_EQ(record_from_csv(to_csv_row(rec)), rec);
    EXPECT_THROW(record_from_csv("a,b,c"), SpecError);
    EXPECT_THROW(record_from_json(nlohmann::json::parse("{\"quantity\":1}")), SpecError);
}

TEST(Serialization, AccumulatorRoundTrip) {
    const auto plan = plan_xq(Region::box(2), Boundary::sphere(2), Point{0, 0});
    const auto acc = run_plan(plan, LatticeConfig(kNN2, 0.5, kSeed), 500);
    EXPECT_EQ(accumulator_from_json(nlohmann::json::parse(to_json(acc).dump())), acc);
}
