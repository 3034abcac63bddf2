#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "perclab/census.hpp"
#include "perclab/cluster.hpp"
#include "perclab/estimate.hpp"

namespace perclab {

/// Per-chunk state of a quantity: one Tally per output channel plus an optional histogram.
struct Accumulator {
    std::vector<Tally> channels;
    std::map<std::uint64_t, std::uint64_t> histogram;

    Tally& channel(std::size_t i) {
        if (channels.size() <= i) channels.resize(i + 1);
        return channels[i];
    }
    void merge(const Accumulator& o) {
        if (channels.size() < o.channels.size()) channels.resize(o.channels.size());
        for (std::size_t i = 0; i < o.channels.size(); ++i) channels[i].merge(o.channels[i]);
        for (const auto& [k, v] : o.histogram) histogram[k] += v;
    }
    friend bool operator==(const Accumulator&, const Accumulator&) = default;
};

inline nlohmann::json to_json(const Accumulator& a) {
    nlohmann::json ch = nlohmann::json::array();
    for (const auto& t : a.channels) ch.push_back({t.n, t.sum, t.sumsq, t.truncated});
    nlohmann::json h = nlohmann::json::array();
    for (const auto& [k, v] : a.histogram) h.push_back({k, v});
    return {{"channels", ch}, {"histogram", h}};
}

inline Accumulator accumulator_from_json(const nlohmann::json& j) {
    Accumulator a;
    for (const auto& c : j.at("channels"))
        a.channels.push_back({c.at(0).get<std::uint64_t>(), c.at(1).get<double>(), c.at(2).get<double>(),
                              c.at(3).get<std::uint64_t>()});
    for (const auto& h : j.at("histogram")) a.histogram[h.at(0).get<std::uint64_t>()] = h.at(1).get<std::uint64_t>();
    return a;
}

struct ChannelSpec {
    std::string quantity;
    StderrKind kind = StderrKind::bernoulli;
};

/// A sampled quantity: observe() folds one replicate's environment into an Accumulator.
struct QuantityPlan {
    std::string tag;
    std::map<std::string, std::string> params;
    std::vector<ChannelSpec> channels;  // channel 0 is the headline estimate
    bool histogram = false;
    std::function<void(Accumulator&, const LatticeConfig&)> observe;
};

inline Accumulator run_plan(const QuantityPlan& plan, const LatticeConfig& cfg, std::uint64_t samples,
                            const RunOptions& opt = {}) {
    require(samples >= 1, "sample count must be at least 1");
    return reduce_replicates<Accumulator>(samples, opt, [&](Accumulator& acc, std::uint64_t r) {
        plan.observe(acc, cfg.with_replicate(r));
    });
}

/// One record per channel, then one Bernoulli record per histogram value.
inline std::vector<EstimateRecord> plan_records(const QuantityPlan& plan, const Accumulator& acc,
                                                const LatticeConfig& cfg) {
    std::vector<EstimateRecord> out;
    for (std::size_t i = 0; i < plan.channels.size(); ++i) {
        const Tally t = i < acc.channels.size() ? acc.channels[i] : Tally{};
        out.push_back(make_record(plan.channels[i].quantity, plan.params, t, plan.channels[i].kind, cfg));
    }
    if (plan.histogram && !acc.channels.empty()) {
        const Tally& base = acc.channels[0];
        for (const auto& [value, count] : acc.histogram) {
            Tally t;
            t.n = base.n;
            t.sum = static_cast<double>(count);
            t.sumsq = t.sum;
            t.truncated = base.truncated;
            auto params = plan.params;
            params["value"] = std::to_string(value);
            out.push_back(make_record(plan.tag + "_bin", std::move(params), t, StderrKind::bernoulli, cfg));
        }
    }
    return out;
}

inline std::string param_str(std::int64_t v) { return std::to_string(v); }
inline std::string param_str(double v) { return format_double(v); }

// ---------------------------------------------------------------------------------------
// Per-configuration observables. Each works on any BondField, so the same code runs on
// the lazy field, on enumeration masks and on resampling overlays.

struct Outcome {
    double value = 0;
    bool truncated = false;
};

enum class HalfArmVariant { undirected, directed, directed_top_count };

inline std::string to_string(HalfArmVariant v) {
    switch (v) {
    case HalfArmVariant::undirected: return "undirected";
    case HalfArmVariant::directed: return "directed";
    case HalfArmVariant::directed_top_count: return "directed_top_count";
    }
    return "?";
}

inline HalfArmVariant parse_half_arm_variant(const std::string& s) {
    if (s == "undirected") return HalfArmVariant::undirected;
    if (s == "directed") return HalfArmVariant::directed;
    if (s == "directed_top_count") return HalfArmVariant::directed_top_count;
    throw SpecError("unknown half-space arm variant '" + s + "' (undirected|directed|directed_top_count)");
}

/// Two-point window when the region is unbounded: radius 4 |x - y| around x.
inline ExplorationCaps two_point_caps(const Region& region, const Point& x, const Point& y) {
    if (region.bounded()) return ExplorationCaps::defaults(region, x.dim());
    return ExplorationCaps{kDefaultMaxVertices, std::max<std::int64_t>(1, 4 * (x - y).norm())};
}

namespace sample {

/// 0 <-> dB(n); a path first meets dB(n) inside B(n), so exploring B(n) is lossless.
template <BondField B>
Outcome one_arm(const B& b, std::int64_t n) {
    require(n >= 0, "one-arm scale must be nonnegative");
    const Point o(b.lattice().dim());
    const Region box = Region::box(static_cast<double>(n));
    const auto c = connected(b, o, Boundary::sphere(static_cast<double>(n)), box, ExplorationCaps::defaults(box, o.dim()));
    return {c.connected ? 1.0 : 0.0, c.truncated};
}

/// Undirected: 0 <-> S'(n) in the half-space (explored in B_H(n)). Directed: 0 <-> S(n)
/// within Rect(n); the top-count variant also needs #(C_Rect(n)(0) in S(n)) > c n^2.
template <BondField B>
Outcome half_space_arm(const B& b, std::int64_t n, HalfArmVariant variant, double c = 0) {
    require(n >= 1, "half-space arm scale must be at least 1");
    const Point o(b.lattice().dim());
    const double nd = static_cast<double>(n);
    switch (variant) {
    case HalfArmVariant::undirected: {
        const Region hb = Region::half_box(nd);
        const auto r = connected(b, o, Boundary::half_sphere(nd), hb, ExplorationCaps::defaults(hb, o.dim()));
        return {r.connected ? 1.0 : 0.0, r.truncated};
    }
    case HalfArmVariant::directed: {
        const Region rect = Region::rect(nd);
        const auto r = connected(b, o, Boundary::plane(nd), rect, ExplorationCaps::defaults(rect, o.dim()));
        return {r.connected ? 1.0 : 0.0, r.truncated};
    }
    case HalfArmVariant::directed_top_count: {
        require(c >= 0, "top-count threshold must be nonnegative");
        const Region rect = Region::rect(nd);
        const auto bc = boundary_count(b, rect, Boundary::plane(nd), o, ExplorationCaps::defaults(rect, o.dim()));
        const bool ok = bc.count > 0 && static_cast<double>(bc.count) > c * nd * nd;
        return {ok ? 1.0 : 0.0, !ok && bc.truncated};
    }
    }
    return {};
}

template <BondField B>
Outcome two_point(const B& b, const Point& x, const Point& y, const Region& region, const ExplorationCaps& caps) {
    detail::require_inside(region, y, "target");
    const auto r = connected(b, x, y, region, caps);
    return {r.connected ? 1.0 : 0.0, r.truncated};
}

/// 0 <-> (n, ..., n) within B(n).
template <BondField B>
Outcome corner_arm(const B& b, std::int64_t n) {
    require(n >= 0, "corner-arm scale must be nonnegative");
    const std::size_t d = b.lattice().dim();
    const Region box = Region::box(static_cast<double>(n));
    const auto r = connected(b, Point(d), Point::diagonal(d, static_cast<Coord>(n)), box, ExplorationCaps::defaults(box, d));
    return {r.connected ? 1.0 : 0.0, r.truncated};
}

/// 1{#C_region(0) > t}; growth stops at t + 1 vertices, so nothing is lost.
template <BondField B>
Outcome cluster_tail(const B& b, std::uint64_t t, const Region& region) {
    const Point o(b.lattice().dim());
    detail::require_inside(region, o, "origin");
    if (t == 0) return {1.0, false};
    std::uint64_t seen = 0;
    const auto st = Explorer::local().run(
        b, o, [&](const Point& y) { return region.contains(y); }, region.window(o.dim()), ExplorationCaps::unlimited(),
        [&](const Point&) { return ++seen > t; });
    return {st.stopped ? 1.0 : 0.0, false};
}

/// (#C_region(0) in B(n))^order.
template <BondField B>
Outcome restricted_moment(const B& b, std::int64_t n, int order, const Region& region, const ExplorationCaps& caps) {
    require(order == 1 || order == 2, "moment order must be 1 or 2");
    const Point o(b.lattice().dim());
    detail::require_inside(region, o, "origin");
    caps.validate();
    std::uint64_t count = 0;
    const auto st = Explorer::local().run(
        b, o, [&](const Point& y) { return region.contains(y); }, region.window(o.dim()), caps, [&](const Point& y) {
            if (y.norm() <= n) ++count;
            return false;
        });
    const double v = static_cast<double>(count);
    return {order == 1 ? v : v * v, st.truncated};
}

/// Number of clusters of the B(5n + buffer) census in the regular family.
template <BondField B>
Outcome regular_census(const B& b, std::int64_t n, double eta, std::int64_t buffer = 0,
                       std::uint64_t budget = kDefaultCensusBudget) {
    require(n >= 1 && eta > 0 && buffer >= 0, "regular census needs n >= 1, eta > 0, buffer >= 0");
    const auto cen = census(b, Region::box(static_cast<double>(5 * n + buffer)), n, 3 * n, budget);
    return {static_cast<double>(count_regular(spanning_cluster_stats(cen, b, n), n, eta)), false};
}

/// Mass sent from the origin: #[C_{Ann'(n/2,4n)}(0) in Ann_H(n,3n)].
template <BondField B>
std::uint64_t transport_send(const B& b, std::int64_t n) {
    require(n >= 1, "transport scale must be at least 1");
    const double nd = static_cast<double>(n);
    const Region domain = Region::shifted_annulus(nd / 2, 4 * nd);
    const Region target = Region::half_annulus(nd, 3 * nd);
    std::uint64_t count = 0;
    Explorer::local().run(
        b, Point(b.lattice().dim()), [&](const Point& y) { return domain.contains(y); }, domain.window(b.lattice().dim()),
        ExplorationCaps::unlimited(), [&](const Point& y) {
            if (target.contains(y)) ++count;
            return false;
        });
    return count;
}

/// Mass received at the origin: #{x in -Ann_H(n,3n) : 0 <-> x within x + Ann'(n/2,4n)}.
/// Every such connection stays in B(7n), so only x in C_{B(7n)}(0) are tested.
template <BondField B>
std::uint64_t transport_get(const B& b, std::int64_t n) {
    require(n >= 1, "transport scale must be at least 1");
    const double nd = static_cast<double>(n);
    const std::size_t d = b.lattice().dim();
    const Point o(d);
    const Region domain = Region::shifted_annulus(nd / 2, 4 * nd);
    const Region sources = Region::half_annulus(nd, 3 * nd);
    const auto reach = explore_cluster(b, o, Region::box(7 * nd), ExplorationCaps::unlimited());
    std::uint64_t count = 0;
    for (const auto& x : reach.vertices) {
        if (!sources.contains(-x)) continue;
        const Region shifted = domain.shifted(x);
        if (connected(b, x, o, shifted).connected) ++count;
    }
    return count;
}

} // namespace sample

// ---------------------------------------------------------------------------------------
// Plans and estimators.

inline QuantityPlan plan_one_arm(std::int64_t n) {
    require(n >= 0, "one-arm scale must be nonnegative");
    QuantityPlan p{"pi", {{"n", param_str(n)}}, {{"pi", StderrKind::bernoulli}}, false, {}};
    p.observe = [n](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::one_arm(LazyBonds(cfg), n);
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

inline QuantityPlan plan_half_space_arm(std::int64_t n, HalfArmVariant variant, double c = 0) {
    require(n >= 1, "half-space arm scale must be at least 1");
    QuantityPlan p{"pi_H", {{"n", param_str(n)}, {"variant", to_string(variant)}}, {{"pi_H", StderrKind::bernoulli}}, false, {}};
    if (variant == HalfArmVariant::directed_top_count) p.params["c"] = param_str(c);
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::half_space_arm(LazyBonds(cfg), n, variant, c);
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

inline QuantityPlan plan_two_point(const Point& x, const Point& y, const Region& region,
                                   std::optional<ExplorationCaps> caps = std::nullopt) {
    detail::require_inside(region, x, "x");
    detail::require_inside(region, y, "y");
    const ExplorationCaps c = caps.value_or(two_point_caps(region, x, y));
    c.validate();
    QuantityPlan p{"tau", {{"x", x.to_string()}, {"y", y.to_string()}, {"region", region.to_string()}},
                   {{"tau", StderrKind::bernoulli}}, false, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::two_point(LazyBonds(cfg), x, y, region, c);
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

inline QuantityPlan plan_corner_arm(std::int64_t n) {
    require(n >= 0, "corner-arm scale must be nonnegative");
    QuantityPlan p{"corner", {{"n", param_str(n)}}, {{"corner", StderrKind::bernoulli}}, false, {}};
    p.observe = [n](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::corner_arm(LazyBonds(cfg), n);
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

inline QuantityPlan plan_cluster_tail(std::uint64_t t, const Region& region) {
    QuantityPlan p{"tail", {{"t", std::to_string(t)}, {"region", region.to_string()}}, {{"tail", StderrKind::bernoulli}}, false, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::cluster_tail(LazyBonds(cfg), t, region);
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

inline QuantityPlan plan_restricted_moment(std::int64_t n, int order, const Region& region,
                                           std::optional<ExplorationCaps> caps = std::nullopt) {
    require(order == 1 || order == 2, "moment order must be 1 or 2");
    require(n >= 0, "moment scale must be nonnegative");
    QuantityPlan p{"moment", {{"n", param_str(n)}, {"order", std::to_string(order)}, {"region", region.to_string()}},
                   {{"moment", StderrKind::jackknife}}, false, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::restricted_moment(LazyBonds(cfg), n, order, region,
                                                 caps.value_or(ExplorationCaps::defaults(region, cfg.dim())));
        acc.channel(0).add(r.value, r.truncated);
    };
    return p;
}

/// Channel 0: mean of X_Q(D,z); histogram: its law.
inline QuantityPlan plan_xq(const Region& D, const Boundary& Q, const Point& z,
                            std::optional<ExplorationCaps> caps = std::nullopt) {
    detail::require_inside(D, z, "z");
    const ExplorationCaps c = caps.value_or(D.bounded() ? ExplorationCaps::defaults(D, z.dim()) : ExplorationCaps{kDefaultMaxVertices, std::nullopt});
    QuantityPlan p{"XQ", {{"D", D.to_string()}, {"Q", Q.to_string()}, {"z", z.to_string()}}, {{"XQ", StderrKind::jackknife}}, true, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = boundary_count(LazyBonds(cfg), D, Q, z, c);
        acc.channel(0).add(static_cast<double>(r.count), r.truncated);
        ++acc.histogram[r.count];
    };
    return p;
}

/// Channel 0: mean number of regular spanning clusters; channel 1: P(count >= threshold).
inline QuantityPlan plan_regular_census(std::int64_t n, double eta, std::uint64_t threshold = 1, std::int64_t buffer = 0,
                                        std::uint64_t budget = kDefaultCensusBudget) {
    require(n >= 1 && eta > 0 && buffer >= 0, "regular census needs n >= 1, eta > 0, buffer >= 0");
    QuantityPlan p{"census",
                   {{"n", param_str(n)}, {"eta", param_str(eta)}, {"threshold", std::to_string(threshold)}, {"buffer", param_str(buffer)}},
                   {{"census_mean", StderrKind::jackknife}, {"census_prob", StderrKind::bernoulli}}, false, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const auto r = sample::regular_census(LazyBonds(cfg), n, eta, buffer, budget);
        acc.channel(0).add(r.value);
        acc.channel(1).add(r.value >= static_cast<double>(threshold) ? 1.0 : 0.0);
    };
    return p;
}

/// Channels: send, get, send - get (paired).
inline QuantityPlan plan_transport(std::int64_t n) {
    require(n >= 1, "transport scale must be at least 1");
    QuantityPlan p{"transport", {{"n", param_str(n)}},
                   {{"transport_send", StderrKind::jackknife}, {"transport_get", StderrKind::jackknife}, {"transport_diff", StderrKind::jackknife}},
                   false, {}};
    p.observe = [n](Accumulator& acc, const LatticeConfig& cfg) {
        const LazyBonds b(cfg);
        const double s = static_cast<double>(sample::transport_send(b, n));
        const double g = static_cast<double>(sample::transport_get(b, n));
        acc.channel(0).add(s);
        acc.channel(1).add(g);
        acc.channel(2).add(s - g);
    };
    return p;
}

inline constexpr std::uint64_t kSbadStreamTag = 0x5BAD;

/// 1 - exp(-(ln s)^2): an outer draw is s-bad when the conditional chance of T_s is at most this.
inline double sbad_threshold(double s) {
    const double l = std::log(s);
    return 1.0 - std::exp(-l * l);
}

/// Edge states fixed by C_D(z): edges inside the cluster and edges from it to D \ C.
template <BondField B>
std::unordered_map<Edge, bool, EdgeHash> frozen_by_cluster(const B& b, const ClusterRecord& cluster, const Region& D) {
    const Lattice& lat = b.lattice();
    std::unordered_map<Edge, bool, EdgeHash> frozen;
    for (const auto& v : cluster.vertices)
        for (std::size_t k = 0; k < lat.degree(); ++k) {
            const Point y = v + lat.offset(k);
            if (!D.contains(y)) continue;
            frozen.emplace(edge_from(lat, v, k), b.open(v, k));
        }
    return frozen;
}

inline bool on_region_boundary(const Lattice& lat, const Region& D, const Point& z) {
    if (!D.contains(z)) return false;
    for (std::size_t k = 0; k < lat.degree(); ++k)
        if (!D.contains(z + lat.offset(k))) return true;
    return false;
}

/// Channel 0: fraction of outer draws that are s-bad; channel 1: mean conditional
/// probability of T_s.
inline QuantityPlan plan_sbad(const Region& D, const Point& z, std::int64_t s, std::uint64_t inner_N,
                              std::optional<ExplorationCaps> caps = std::nullopt) {
    require(s >= 2, "s must be at least 2");
    require(inner_N >= 1, "inner sample count must be at least 1");
    const double thr = sbad_threshold(static_cast<double>(s));
    QuantityPlan p{"sbad",
                   {{"D", D.to_string()}, {"z", z.to_string()}, {"s", param_str(s)}, {"inner_N", std::to_string(inner_N)}},
                   {{"sbad_rate", StderrKind::bernoulli}, {"sbad_conditional", StderrKind::jackknife}},
                   false, {}};
    p.observe = [=](Accumulator& acc, const LatticeConfig& cfg) {
        const LazyBonds outer(cfg);
        if (!on_region_boundary(cfg.lattice, D, z))
            throw SpecError("s-bad rate needs z = " + z.to_string() + " on the inner boundary of " + D.to_string());
        const auto cluster = explore_cluster(outer, z, D, D.bounded() ? ExplorationCaps::defaults(D, z.dim()) : ExplorationCaps{kDefaultMaxVertices, std::nullopt});
        const auto frozen = frozen_by_cluster(outer, cluster, D);
        bool truncated = cluster.truncated;
        std::uint64_t holds = 0;
        for (std::uint64_t i = 0; i < inner_N; ++i) {
            const LazyBonds fresh(cfg.derived(kSbadStreamTag, cfg.replicate * inner_N + i));
            const OverlayBonds<LazyBonds> mixed(fresh, frozen);
            const auto diag = regularity_diagnostic(mixed, z, s, caps);
            truncated = truncated || diag.indeterminate;
            holds += diag.ts_holds ? 1 : 0;
        }
        const double cond = static_cast<double>(holds) / static_cast<double>(inner_N);
        acc.channel(0).add(cond <= thr ? 1.0 : 0.0, truncated);
        acc.channel(1).add(cond, truncated);
    };
    return p;
}

namespace detail {
inline EstimateRecord headline(const QuantityPlan& plan, const LatticeConfig& cfg, std::uint64_t N, const RunOptions& opt) {
    return plan_records(plan, run_plan(plan, cfg, N, opt), cfg).front();
}
} // namespace detail

inline EstimateRecord est_one_arm(const LatticeConfig& cfg, std::int64_t n, std::uint64_t N, const RunOptions& opt = {}) {
    return detail::headline(plan_one_arm(n), cfg, N, opt);
}

inline EstimateRecord est_half_space_arm(const LatticeConfig& cfg, std::int64_t n, HalfArmVariant variant, std::uint64_t N,
                                         double c = 0, const RunOptions& opt = {}) {
    return detail::headline(plan_half_space_arm(n, variant, c), cfg, N, opt);
}

inline EstimateRecord est_two_point(const LatticeConfig& cfg, const Point& x, const Point& y, const Region& region,
                                    std::uint64_t N, const RunOptions& opt = {},
                                    std::optional<ExplorationCaps> caps = std::nullopt) {
    return detail::headline(plan_two_point(x, y, region, caps), cfg, N, opt);
}

inline EstimateRecord est_corner_arm(const LatticeConfig& cfg, std::int64_t n, std::uint64_t N, const RunOptions& opt = {}) {
    return detail::headline(plan_corner_arm(n), cfg, N, opt);
}

inline EstimateRecord est_cluster_tail(const LatticeConfig& cfg, std::uint64_t t, const Region& region, std::uint64_t N,
                                       const RunOptions& opt = {}) {
    return detail::headline(plan_cluster_tail(t, region), cfg, N, opt);
}

inline EstimateRecord est_restricted_moments(const LatticeConfig& cfg, std::int64_t n, int order, const Region& region,
                                             std::uint64_t N, const RunOptions& opt = {}) {
    return detail::headline(plan_restricted_moment(n, order, region), cfg, N, opt);
}

struct XQEstimate {
    EstimateRecord mean;
    std::map<std::uint64_t, EstimateRecord> bins;
};

inline XQEstimate est_xq_distribution(const LatticeConfig& cfg, const Region& D, const Boundary& Q, const Point& z,
                                      std::uint64_t N, const RunOptions& opt = {}) {
    const auto plan = plan_xq(D, Q, z);
    const auto recs = plan_records(plan, run_plan(plan, cfg, N, opt), cfg);
    XQEstimate out{recs.front(), {}};
    for (std::size_t i = 1; i < recs.size(); ++i) out.bins.emplace(std::stoull(recs[i].params.at("value")), recs[i]);
    return out;
}

struct CensusEstimate {
    EstimateRecord mean;
    EstimateRecord probability;
};

inline CensusEstimate est_regular_census(const LatticeConfig& cfg, std::int64_t n, double eta, std::uint64_t N,
                                         std::uint64_t threshold = 1, std::int64_t buffer = 0, const RunOptions& opt = {}) {
    const auto plan = plan_regular_census(n, eta, threshold, buffer);
    const auto recs = plan_records(plan, run_plan(plan, cfg, N, opt), cfg);
    return {recs[0], recs[1]};
}

struct TransportAudit {
    EstimateRecord send;
    EstimateRecord get;
    EstimateRecord diff;
    double z_paired = 0;    // mean(send - get) / stderr of the paired difference
    double z_combined = 0;  // same difference over sqrt(se_send^2 + se_get^2)
};

inline TransportAudit summarize_transport(const std::vector<EstimateRecord>& recs) {
    TransportAudit a{recs.at(0), recs.at(1), recs.at(2), 0, 0};
    const double diff = a.send.estimate - a.get.estimate;
    const double comb = std::hypot(a.send.stderr_, a.get.stderr_);
    a.z_paired = a.diff.stderr_ > 0 ? a.diff.estimate / a.diff.stderr_ : (a.diff.estimate == 0 ? 0 : INFINITY);
    a.z_combined = comb > 0 ? diff / comb : (diff == 0 ? 0 : INFINITY);
    return a;
}

inline TransportAudit mass_transport_audit(const LatticeConfig& cfg, std::int64_t n, std::uint64_t N, const RunOptions& opt = {}) {
    const auto plan = plan_transport(n);
    return summarize_transport(plan_records(plan, run_plan(plan, cfg, N, opt), cfg));
}

struct SbadEstimate {
    EstimateRecord rate;
    EstimateRecord conditional_mean;
};

inline SbadEstimate est_sbad_rate(const LatticeConfig& cfg, const Region& D, const Point& z, std::int64_t s,
                                  std::uint64_t inner_N, std::uint64_t outer_N, const RunOptions& opt = {}) {
    const auto plan = plan_sbad(D, z, s, inner_N);
    const auto recs = plan_records(plan, run_plan(plan, cfg, outer_N, opt), cfg);
    return {recs[0], recs[1]};
}

} // namespace perclab
