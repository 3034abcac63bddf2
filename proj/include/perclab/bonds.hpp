#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perclab/error.hpp"
#include "perclab/lattice.hpp"
#include "perclab/point.hpp"

namespace perclab {

/// Identifier of the bond-state generator. Recorded in every result manifest;
/// changing anything in this file that alters u(e) must bump it.
inline constexpr const char* kMixerId = "splitmix64-absorb/1";

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// splitmix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr double to_unit_interval(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Unordered lattice edge, stored as its lexicographically smaller endpoint plus the index
/// (into Lattice::offsets()) of the offset leading to the larger endpoint.
struct Edge {
    Point lo;
    std::uint32_t offset_index = 0;

    Point hi(const Lattice& lattice) const { return lo + lattice.offset(offset_index); }

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge& a, const Edge& b) {
        if (auto c = a.lo <=> b.lo; c != 0) return c;
        return a.offset_index <=> b.offset_index;
    }
};

struct EdgeHash {
    std::size_t operator()(const Edge& e) const noexcept {
        return PointHash{}(e.lo) ^ mix64(e.offset_index + kGolden);
    }
};

/// Canonical edge joining x to x + offset(k).
inline Edge edge_from(const Lattice& lattice, const Point& x, std::size_t k) {
    if (k >= lattice.degree() / 2) return {x, static_cast<std::uint32_t>(k)};
    return {x + lattice.offset(k), static_cast<std::uint32_t>(lattice.opposite(k))};
}

inline Edge canonical_edge(const Lattice& lattice, const Point& a, const Point& b) {
    lattice.check(a);
    lattice.check(b);
    const std::size_t k = lattice.offset_index(b - a);
    if (k >= lattice.degree())
        throw SpecError("points " + a.to_string() + " and " + b.to_string() + " are not adjacent");
    return edge_from(lattice, a, k);
}

/// Every edge with both endpoints in the given vertex list, sorted.
inline std::vector<Edge> edges_within(const Lattice& lattice, const std::vector<Point>& vertices) {
    std::unordered_map<Point, int, PointHash> in;
    for (const auto& v : vertices) in.emplace(v, 0);
    std::vector<Edge> out;
    const std::size_t half = lattice.degree() / 2;
    for (const auto& v : vertices)
        for (std::size_t k = half; k < lattice.degree(); ++k)
            if (in.contains(v + lattice.offset(k))) out.push_back({v, static_cast<std::uint32_t>(k)});
    std::sort(out.begin(), out.end());
    return out;
}

// Canonical byte encoding -------------------------------------------------------------------
//
// encode(e) = varint(zigzag(lo(1))) ... varint(zigzag(lo(d))) varint(offset_index)
//
// zigzag(c) = (c << 1) ^ (c >> 63) on the sign-extended 64-bit value; varint is unsigned
// LEB128 (7 payload bits per byte, least significant group first, high bit set on every
// byte except the last).

struct EdgeBytes {
    std::array<std::uint8_t, kMaxDim * 10 + 10> data{};
    std::size_t size = 0;

    void put_varint(std::uint64_t v) noexcept {
        while (v >= 0x80) {
            data[size++] = static_cast<std::uint8_t>(v | 0x80);
            v >>= 7;
        }
        data[size++] = static_cast<std::uint8_t>(v);
    }
};

inline EdgeBytes encode_edge(const Edge& e) noexcept {
    EdgeBytes b;
    for (std::size_t i = 0; i < e.lo.dim(); ++i) {
        const auto c = static_cast<std::int64_t>(e.lo[i]);
        b.put_varint((static_cast<std::uint64_t>(c) << 1) ^ static_cast<std::uint64_t>(c >> 63));
    }
    b.put_varint(e.offset_index);
    return b;
}

/// Stream key for one (seed, replicate) pair.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replicate) noexcept {
    return mix64(mix64(seed + kGolden) ^ (replicate + kGolden));
}

/// u(e): the encoding is absorbed as little-endian 8-byte words (the last one zero padded),
/// s <- mix64(s ^ w) + golden, then finalised with the byte count.
inline std::uint64_t edge_hash(std::uint64_t key, const Edge& e) noexcept {
    const EdgeBytes b = encode_edge(e);
    std::uint64_t s = key;
    for (std::size_t off = 0; off < b.size; off += 8) {
        std::uint64_t w = 0;
        const std::size_t n = std::min<std::size_t>(8, b.size - off);
        for (std::size_t i = 0; i < n; ++i) w |= std::uint64_t{b.data[off + i]} << (8 * i);
        s = mix64(s ^ w) + kGolden;
    }
    return mix64(s ^ (b.size + kGolden));
}

/// Dimension, adjacency, bond probability and randomness coordinates of one configuration.
struct LatticeConfig {
    Lattice lattice;
    double p = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;

    LatticeConfig() = default;
    LatticeConfig(Lattice lat, double p_, std::uint64_t seed_, std::uint64_t replicate_ = 0)
        : lattice(std::move(lat)), p(p_), seed(seed_), replicate(replicate_) {
        require(p >= 0.0 && p <= 1.0, "bond probability must lie in [0,1]");
    }

    std::size_t dim() const { return lattice.dim(); }

    LatticeConfig with_replicate(std::uint64_t r) const {
        LatticeConfig c = *this;
        c.replicate = r;
        return c;
    }
    LatticeConfig with_p(double q) const { return LatticeConfig(lattice, q, seed, replicate); }

    /// Independent stream family for auxiliary randomness (e.g. nested resampling).
    LatticeConfig derived(std::uint64_t tag, std::uint64_t replicate_) const {
        LatticeConfig c = *this;
        c.seed = mix64(seed ^ mix64(tag + kGolden));
        c.replicate = replicate_;
        return c;
    }
};

/// Anything that answers "is the edge from x along offset k open?".
template <class B>
concept BondField = requires(const B& b, const Point& x, std::size_t k) {
    { b.lattice() } -> std::convertible_to<const Lattice&>;
    { b.open(x, k) } -> std::convertible_to<bool>;
};

/// Bond states generated on demand from (seed, replicate, edge); nothing is stored.
class LazyBonds {
public:
    explicit LazyBonds(const LatticeConfig& cfg)
        : lattice_(cfg.lattice), p_(cfg.p), key_(stream_key(cfg.seed, cfg.replicate)) {}

    const Lattice& lattice() const noexcept { return lattice_; }
    double p() const noexcept { return p_; }

    double uniform(const Edge& e) const noexcept { return to_unit_interval(edge_hash(key_, e)); }
    bool open(const Edge& e) const noexcept { return uniform(e) < p_; }
    bool open(const Point& x, std::size_t k) const { return open(edge_from(lattice_, x, k)); }

private:
    Lattice lattice_;
    double p_;
    std::uint64_t key_;
};

struct EdgeState {
    bool open;
    double u;
};

/// State of the edge {a, b} in configuration cfg. Throws if a and b are not adjacent.
inline EdgeState edge_state(const LatticeConfig& cfg, const Point& a, const Point& b) {
    const Edge e = canonical_edge(cfg.lattice, a, b);
    const LazyBonds bonds(cfg);
    const double u = bonds.uniform(e);
    return {u < cfg.p, u};
}

/// A fixed finite list of edges whose states are given by the bits of a mask; every other
/// edge is closed.
class MaskBonds {
public:
    MaskBonds(Lattice lattice, const std::vector<Edge>& edges) : lattice_(std::move(lattice)), edges_(edges) {
        if (edges.size() > 63) throw ResourceError("MaskBonds supports at most 63 edges");
        for (std::size_t i = 0; i < edges.size(); ++i) index_.emplace(edges[i], static_cast<int>(i));
    }

    const Lattice& lattice() const noexcept { return lattice_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    void set_mask(std::uint64_t m) noexcept { mask_ = m; }
    std::uint64_t mask() const noexcept { return mask_; }

    int index_of(const Edge& e) const {
        const auto it = index_.find(e);
        return it == index_.end() ? -1 : it->second;
    }

    bool open(const Point& x, std::size_t k) const {
        const int i = index_of(edge_from(lattice_, x, k));
        return i >= 0 && ((mask_ >> i) & 1u) != 0;
    }

private:
    Lattice lattice_;
    std::vector<Edge> edges_;
    std::unordered_map<Edge, int, EdgeHash> index_;
    std::uint64_t mask_ = 0;
};

/// An explicit set of open edges; every other edge is closed.
class ExplicitBonds {
public:
    explicit ExplicitBonds(Lattice lattice) : lattice_(std::move(lattice)) {}

    const Lattice& lattice() const noexcept { return lattice_; }
    void open_edge(const Point& a, const Point& b) { open_.emplace(canonical_edge(lattice_, a, b), 1); }
    /// Opens every edge along a path of consecutive neighbours.
    void open_path(const std::vector<Point>& path) {
        for (std::size_t i = 0; i + 1 < path.size(); ++i) open_edge(path[i], path[i + 1]);
    }
    bool open(const Point& x, std::size_t k) const { return open_.contains(edge_from(lattice_, x, k)); }

private:
    Lattice lattice_;
    std::unordered_map<Edge, int, EdgeHash> open_;
};

/// Base field with one edge's state inverted.
template <BondField Base>
class FlippedBonds {
public:
    FlippedBonds(const Base& base, Edge flipped) : base_(base), flipped_(std::move(flipped)) {}

    const Lattice& lattice() const noexcept { return base_.lattice(); }
    bool open(const Point& x, std::size_t k) const {
        const bool s = base_.open(x, k);
        return edge_from(base_.lattice(), x, k) == flipped_ ? !s : s;
    }

private:
    const Base& base_;
    Edge flipped_;
};

/// A set of frozen edge states layered over a base field.
template <BondField Base>
class OverlayBonds {
public:
    OverlayBonds(const Base& base, const std::unordered_map<Edge, bool, EdgeHash>& frozen)
        : base_(base), frozen_(frozen) {}

    const Lattice& lattice() const noexcept { return base_.lattice(); }
    bool open(const Point& x, std::size_t k) const {
        const auto it = frozen_.find(edge_from(base_.lattice(), x, k));
        return it != frozen_.end() ? it->second : base_.open(x, k);
    }

private:
    const Base& base_;
    const std::unordered_map<Edge, bool, EdgeHash>& frozen_;
};

} // namespace perclab
