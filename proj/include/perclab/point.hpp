#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "perclab/error.hpp"

namespace perclab {

/// Largest supported lattice dimension. Points are stored inline.
inline constexpr std::size_t kMaxDim = 16;

using Coord = std::int32_t;

/// A vertex of Z^d. Ordering is lexicographic by coordinate.
class Point {
public:
    Point() = default;

    explicit Point(std::size_t dim) : dim_(static_cast<std::uint8_t>(dim)) {
        require(dim >= 1 && dim <= kMaxDim, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    }

    Point(std::initializer_list<Coord> coords) : Point(coords.size()) {
        std::copy(coords.begin(), coords.end(), c_.begin());
    }

    template <class Int>
    static Point from(std::span<const Int> coords) {
        Point x(coords.size());
        for (std::size_t i = 0; i < coords.size(); ++i) x.c_[i] = static_cast<Coord>(coords[i]);
        return x;
    }

    static Point unit(std::size_t dim, std::size_t axis, Coord scale = 1) {
        Point x(dim);
        x.c_.at(axis) = scale;
        return x;
    }

    /// (v, v, ..., v)
    static Point diagonal(std::size_t dim, Coord v) {
        Point x(dim);
        std::fill_n(x.c_.begin(), dim, v);
        return x;
    }

    std::size_t dim() const noexcept { return dim_; }
    Coord operator[](std::size_t i) const noexcept { return c_[i]; }
    Coord& operator[](std::size_t i) noexcept { return c_[i]; }
    std::span<const Coord> coords() const noexcept { return {c_.data(), dim_}; }

    /// l-infinity norm.
    std::int64_t norm() const noexcept {
        std::int64_t m = 0;
        for (std::size_t i = 0; i < dim_; ++i) m = std::max<std::int64_t>(m, std::abs(std::int64_t{c_[i]}));
        return m;
    }

    std::int64_t l1_norm() const noexcept {
        std::int64_t s = 0;
        for (std::size_t i = 0; i < dim_; ++i) s += std::abs(std::int64_t{c_[i]});
        return s;
    }

    bool is_origin() const noexcept {
        for (std::size_t i = 0; i < dim_; ++i)
            if (c_[i] != 0) return false;
        return true;
    }

    Point& operator+=(const Point& o) {
        check_dim(o);
        for (std::size_t i = 0; i < dim_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Point& operator-=(const Point& o) {
        check_dim(o);
        for (std::size_t i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    friend Point operator+(Point a, const Point& b) { return a += b; }
    friend Point operator-(Point a, const Point& b) { return a -= b; }
    friend Point operator-(Point a) {
        for (std::size_t i = 0; i < a.dim_; ++i) a.c_[i] = -a.c_[i];
        return a;
    }

    friend bool operator==(const Point& a, const Point& b) noexcept {
        return a.dim_ == b.dim_ && std::equal(a.c_.begin(), a.c_.begin() + a.dim_, b.c_.begin());
    }
    friend std::strong_ordering operator<=>(const Point& a, const Point& b) noexcept {
        if (a.dim_ != b.dim_) return a.dim_ <=> b.dim_;
        for (std::size_t i = 0; i < a.dim_; ++i)
            if (a.c_[i] != b.c_[i]) return a.c_[i] <=> b.c_[i];
        return std::strong_ordering::equal;
    }

    std::string to_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < dim_; ++i) {
            if (i) s += ',';
            s += std::to_string(c_[i]);
        }
        return s + ")";
    }

    void check_dim(const Point& o) const {
        if (o.dim_ != dim_) throw SpecError("dimension mismatch: " + to_string() + " vs " + o.to_string());
    }

private:
    std::array<Coord, kMaxDim> c_{};
    std::uint8_t dim_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, const Point& x) { return os << x.to_string(); }

struct PointHash {
    std::size_t operator()(const Point& x) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ x.dim();
        for (std::size_t i = 0; i < x.dim(); ++i) {
            h ^= static_cast<std::uint32_t>(x[i]);
            h *= 0xff51afd7ed558ccdULL;
            h ^= h >> 29;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Inclusive axis-aligned box [lo, hi] of lattice points.
struct Window {
    Point lo;
    Point hi;

    std::size_t dim() const { return lo.dim(); }

    bool empty() const {
        for (std::size_t i = 0; i < lo.dim(); ++i)
            if (lo[i] > hi[i]) return true;
        return false;
    }

    /// Number of lattice points, saturating at UINT64_MAX.
    std::uint64_t volume() const {
        if (empty()) return 0;
        unsigned __int128 v = 1;
        for (std::size_t i = 0; i < lo.dim(); ++i) {
            v *= static_cast<std::uint64_t>(std::int64_t{hi[i]} - lo[i] + 1);
            if (v > UINT64_MAX) return UINT64_MAX;
        }
        return static_cast<std::uint64_t>(v);
    }

    bool contains(const Point& x) const {
        for (std::size_t i = 0; i < lo.dim(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    /// Row-major index of x (last coordinate fastest), so index order is lexicographic order.
    std::uint64_t index_of(const Point& x) const {
        std::uint64_t idx = 0;
        for (std::size_t i = 0; i < lo.dim(); ++i)
            idx = idx * static_cast<std::uint64_t>(hi[i] - lo[i] + 1) + static_cast<std::uint64_t>(x[i] - lo[i]);
        return idx;
    }

    Point point_at(std::uint64_t idx) const {
        Point x = lo;
        for (std::size_t i = lo.dim(); i-- > 0;) {
            const auto w = static_cast<std::uint64_t>(hi[i] - lo[i] + 1);
            x[i] = lo[i] + static_cast<Coord>(idx % w);
            idx /= w;
        }
        return x;
    }

    static Window cube(std::size_t dim, std::int64_t radius, const Point& center) {
        Window w{center, center};
        for (std::size_t i = 0; i < dim; ++i) {
            w.lo[i] = static_cast<Coord>(center[i] - radius);
            w.hi[i] = static_cast<Coord>(center[i] + radius);
        }
        return w;
    }

    Window shifted(const Point& s) const { return {lo + s, hi + s}; }

    Window intersect(const Window& o) const {
        Window w = *this;
        for (std::size_t i = 0; i < lo.dim(); ++i) {
            w.lo[i] = std::max(lo[i], o.lo[i]);
            w.hi[i] = std::min(hi[i], o.hi[i]);
        }
        return w;
    }

    Window hull(const Window& o) const {
        Window w = *this;
        for (std::size_t i = 0; i < lo.dim(); ++i) {
            w.lo[i] = std::min(lo[i], o.lo[i]);
            w.hi[i] = std::max(hi[i], o.hi[i]);
        }
        return w;
    }
};

/// Visits every point of a window in lexicographic order. f returns void.
template <class F>
void for_each_in_window(const Window& w, F&& f) {
    if (w.empty()) return;
    Point x = w.lo;
    const std::size_t d = w.dim();
    while (true) {
        f(static_cast<const Point&>(x));
        std::size_t i = d;
        while (i-- > 0) {
            if (x[i] < w.hi[i]) {
                ++x[i];
                break;
            }
            x[i] = w.lo[i];
            if (i == 0) return;
        }
    }
}

} // namespace perclab
