#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "perclab/bonds.hpp"
#include "perclab/error.hpp"
#include "perclab/point.hpp"
#include "perclab/point_set.hpp"
#include "perclab/region.hpp"

namespace perclab {

inline constexpr std::uint64_t kDefaultMaxVertices = 1'000'000;

/// Budget for growing a cluster. max_radius is measured in l-inf distance from the source.
struct ExplorationCaps {
    std::optional<std::uint64_t> max_vertices;
    std::optional<std::int64_t> max_radius;

    static ExplorationCaps unlimited() { return {}; }

    /// 10^6 vertices; radius twice the largest region radius when the region is bounded.
    static ExplorationCaps defaults(const Region& region, std::size_t d) {
        ExplorationCaps c;
        c.max_vertices = kDefaultMaxVertices;
        if (region.bounded()) c.max_radius = 2 * std::max<std::int64_t>(1, region.radius(d));
        return c;
    }

    void validate() const {
        require(!max_vertices || *max_vertices > 0, "max_vertices cap must be positive");
        require(!max_radius || *max_radius > 0, "max_radius cap must be positive");
    }

    friend bool operator==(const ExplorationCaps&, const ExplorationCaps&) = default;
};

struct ExploreStats {
    std::uint64_t visited = 0;
    bool truncated = false;  // a cap fired
    bool stopped = false;    // the visitor asked to stop
};

/// Breadth-first growth from `source` over open edges whose endpoints both satisfy `inside`.
/// `visit(x)` is called once per vertex in discovery order (source first) and returns true
/// to stop early. `window`, when known, bounds every admissible point and enables the dense
/// visited table.
class Explorer {
public:
    template <BondField B, class Inside, class Visit>
    ExploreStats run(const B& bonds, const Point& source, Inside&& inside, std::optional<Window> window,
                     const ExplorationCaps& caps, Visit&& visit) {
        const Lattice& lat = bonds.lattice();
        const std::size_t deg = lat.degree();
        if (caps.max_radius) {
            const Window rw = Window::cube(lat.dim(), *caps.max_radius, source);
            window = window ? window->intersect(rw) : rw;
        }
        visited_.reset(window);
        queue_.clear();
        ExploreStats st;
        visited_.insert(source);
        queue_.push_back(source);
        st.visited = 1;
        if (visit(static_cast<const Point&>(source))) {
            st.stopped = true;
            return st;
        }
        for (std::size_t head = 0; head < queue_.size(); ++head) {
            const Point x = queue_[head];
            for (std::size_t k = 0; k < deg; ++k) {
                const Point y = x + lat.offset(k);
                if (!inside(static_cast<const Point&>(y))) continue;
                if (caps.max_radius && (y - source).norm() > *caps.max_radius) {
                    if (bonds.open(x, k)) st.truncated = true;
                    continue;
                }
                if (visited_.contains(y) || !bonds.open(x, k)) continue;
                if (caps.max_vertices && st.visited >= *caps.max_vertices) {
                    st.truncated = true;
                    return st;
                }
                visited_.insert(y);
                queue_.push_back(y);
                ++st.visited;
                if (visit(static_cast<const Point&>(y))) {
                    st.stopped = true;
                    return st;
                }
            }
        }
        return st;
    }

    /// Vertices discovered by the last run, in discovery order.
    const std::vector<Point>& order() const noexcept { return queue_; }

    /// Per-thread scratch instance so hot loops do not reallocate.
    static Explorer& local() {
        thread_local Explorer e;
        return e;
    }

private:
    PointSet visited_;
    std::vector<Point> queue_;
};

/// The explored restricted cluster C_A(source).
struct ClusterRecord {
    Point source;
    Region region = Region::lattice();
    std::vector<Point> vertices;  // sorted lexicographically
    std::vector<Boundary> boundaries;
    std::vector<std::uint64_t> boundary_hits;  // aligned with boundaries; lower bounds if truncated
    bool truncated = false;
    std::uint64_t visited_count = 0;
    ExplorationCaps caps;

    bool contains(const Point& x) const { return std::binary_search(vertices.begin(), vertices.end(), x); }
    std::uint64_t size() const noexcept { return vertices.size(); }
};

namespace detail {
inline void require_inside(const Region& region, const Point& x, const char* what) {
    if (!region.contains(x)) throw SpecError(std::string(what) + " " + x.to_string() + " lies outside " + region.to_string());
}
} // namespace detail

template <BondField B>
ClusterRecord explore_cluster(const B& bonds, const Point& source, const Region& region, const ExplorationCaps& caps,
                              const std::vector<Boundary>& boundaries = {}) {
    bonds.lattice().check(source);
    caps.validate();
    detail::require_inside(region, source, "source");
    ClusterRecord rec;
    rec.source = source;
    rec.region = region;
    rec.caps = caps;
    rec.boundaries = boundaries;
    rec.boundary_hits.assign(boundaries.size(), 0);
    auto& ex = Explorer::local();
    const auto st = ex.run(
        bonds, source, [&](const Point& y) { return region.contains(y); }, region.window(source.dim()), caps,
        [&](const Point& y) {
            for (std::size_t i = 0; i < boundaries.size(); ++i)
                if (boundaries[i].contains(y)) ++rec.boundary_hits[i];
            return false;
        });
    rec.vertices = ex.order();
    std::sort(rec.vertices.begin(), rec.vertices.end());
    rec.truncated = st.truncated;
    rec.visited_count = st.visited;
    return rec;
}

struct Connection {
    bool connected = false;
    bool truncated = false;  // only meaningful when !connected
};

namespace detail {
inline bool hits(const Point& target, const Point& y) { return y == target; }
inline bool hits(const Boundary& target, const Point& y) { return target.contains(y); }

template <BondField B, class Target, class Inside>
Connection connect(const B& bonds, const Point& x, const Target& target, Inside&& inside, std::optional<Window> window,
                   const ExplorationCaps& caps) {
    const auto st = Explorer::local().run(bonds, x, inside, window, caps,
                                          [&](const Point& y) { return hits(target, y); });
    return {st.stopped, !st.stopped && st.truncated};
}
} // namespace detail

/// x <-> target by an open path inside `region`. Stops at the first hit.
template <BondField B, class Target>
Connection connected(const B& bonds, const Point& x, const Target& target, const Region& region,
                     const ExplorationCaps& caps = {}) {
    bonds.lattice().check(x);
    caps.validate();
    detail::require_inside(region, x, "start point");
    return detail::connect(
        bonds, x, target, [&](const Point& y) { return region.contains(y); }, region.window(x.dim()), caps);
}

/// y <-> target inside `region` by a path that meets `forbidden` at most at y itself.
template <BondField B, class Target>
Connection connected_off(const B& bonds, const Point& y, const Target& target, const Region& region,
                         const std::unordered_set<Point, PointHash>& forbidden, const ExplorationCaps& caps = {}) {
    bonds.lattice().check(y);
    caps.validate();
    detail::require_inside(region, y, "start point");
    return detail::connect(
        bonds, y, target, [&](const Point& z) { return region.contains(z) && (z == y || !forbidden.contains(z)); },
        region.window(y.dim()), caps);
}

struct BoundaryCount {
    std::uint64_t count = 0;
    bool truncated = false;
};

/// X_Q(D, z) = #(C_D(z) intersected with Q).
template <BondField B>
BoundaryCount boundary_count(const B& bonds, const Region& D, const Boundary& Q, const Point& z,
                             const ExplorationCaps& caps = {}) {
    bonds.lattice().check(z);
    caps.validate();
    detail::require_inside(D, z, "z");
    BoundaryCount out;
    const auto st = Explorer::local().run(
        bonds, z, [&](const Point& y) { return D.contains(y); }, D.window(z.dim()), caps, [&](const Point& y) {
            if (Q.contains(y)) ++out.count;
            return false;
        });
    out.truncated = st.truncated;
    return out;
}

/// s^4 (ln s)^7, the cluster-size threshold of the regularity event.
inline double regularity_threshold(double s) {
    const double l = std::log(s);
    return s * s * s * s * std::pow(l, 7);
}

struct RegularityDiagnostic {
    std::uint64_t size_in_ball = 0;
    bool ts_holds = true;        // size_in_ball < s^4 (ln s)^7
    bool indeterminate = false;  // a cap fired while the count was still below the threshold
};

/// Counts C(x) inside x + B(s), exploring Z^d under caps (default: radius 2s, 10^6 vertices).
template <BondField B>
RegularityDiagnostic regularity_diagnostic(const B& bonds, const Point& x, std::int64_t s,
                                           std::optional<ExplorationCaps> caps = std::nullopt) {
    require(s >= 2, "regularity scale s must be at least 2");
    bonds.lattice().check(x);
    const ExplorationCaps c = caps.value_or(ExplorationCaps{kDefaultMaxVertices, 2 * s});
    c.validate();
    RegularityDiagnostic out;
    const auto st = Explorer::local().run(
        bonds, x, [](const Point&) { return true; }, std::nullopt, c, [&](const Point& y) {
            if ((y - x).norm() <= s) ++out.size_in_ball;
            return false;
        });
    const double thr = regularity_threshold(static_cast<double>(s));
    out.ts_holds = static_cast<double>(out.size_in_ball) < thr;
    // a full ball cannot grow, whatever the caps cut off
    const double ball = std::pow(static_cast<double>(2 * s + 1), static_cast<double>(bonds.lattice().dim()));
    out.indeterminate = st.truncated && out.ts_holds && static_cast<double>(out.size_in_ball) < ball;
    return out;
}

inline constexpr std::size_t kMaxPivotalWindowEdges = 4096;

/// Edges inside `window` whose flip changes the indicator of {x <-> y within window}.
template <BondField B>
std::vector<Edge> pivotal_edges(const B& bonds, const Point& x, const Point& y, const Region& window) {
    const Lattice& lat = bonds.lattice();
    const auto d = lat.dim();
    require(window.bounded(), "pivotal_edges needs a bounded window");
    const auto verts = enumerate_region(window, d);
    const auto edges = edges_within(lat, verts);
    if (edges.size() > kMaxPivotalWindowEdges)
        throw ResourceError("window " + window.to_string() + " has " + std::to_string(edges.size()) +
                            " edges; exhaustive flipping is limited to " + std::to_string(kMaxPivotalWindowEdges));
    const bool base = connected(bonds, x, y, window).connected;
    std::vector<Edge> out;
    for (const auto& e : edges) {
        const FlippedBonds<B> flipped(bonds, e);
        if (connected(flipped, x, y, window).connected != base) out.push_back(e);
    }
    return out;
}

} // namespace perclab
