#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "perclab/error.hpp"
#include "perclab/point.hpp"

namespace perclab {

/// Nearest-neighbour (l1 distance 1) or spread-out (l-inf distance <= L) adjacency.
struct Adjacency {
    enum class Kind { nearest, spread_out };

    Kind kind = Kind::nearest;
    int range = 1;

    static Adjacency nearest() { return {Kind::nearest, 1}; }
    static Adjacency spread_out(int L) {
        require(L >= 1, "spread-out range must be positive");
        return {Kind::spread_out, L};
    }

    std::uint64_t degree(std::size_t d) const {
        if (kind == Kind::nearest) return 2 * d;
        std::uint64_t v = 1;
        for (std::size_t i = 0; i < d; ++i) v *= static_cast<std::uint64_t>(2 * range + 1);
        return v - 1;
    }

    bool adjacent(const Point& x, const Point& y) const {
        x.check_dim(y);
        const Point diff = y - x;
        if (kind == Kind::nearest) return diff.l1_norm() == 1;
        return !diff.is_origin() && diff.norm() <= range;
    }

    std::string to_string() const {
        return kind == Kind::nearest ? "nn" : "so(L=" + std::to_string(range) + ")";
    }

    static Adjacency parse(std::string_view s) {
        if (s == "nn" || s == "nearest") return nearest();
        if (s.starts_with("so(L=") && s.ends_with(")")) {
            const std::string num(s.substr(5, s.size() - 6));
            try {
                std::size_t used = 0;
                const int L = std::stoi(num, &used);
                if (used == num.size()) return spread_out(L);
            } catch (const std::exception&) {
            }
        }
        throw SpecError("unknown adjacency '" + std::string(s) + "'");
    }

    friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

/// Z^d with a fixed adjacency rule. Neighbour offsets are cached in lexicographic order;
/// the list is antisymmetric: offset[degree-1-k] == -offset[k].
class Lattice {
public:
    Lattice() : Lattice(2, Adjacency::nearest()) {}

    Lattice(std::size_t dim, Adjacency adj) : dim_(dim), adj_(adj) {
        require(dim >= 1 && dim <= kMaxDim, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
        const std::uint64_t deg = adj.degree(dim);
        require(deg <= (1u << 24), "adjacency degree too large");
        auto offs = std::make_shared<std::vector<Point>>();
        offs->reserve(deg);
        if (adj.kind == Adjacency::Kind::nearest) {
            for (std::size_t i = 0; i < dim; ++i) offs->push_back(Point::unit(dim, i, -1));
            for (std::size_t i = dim; i-- > 0;) offs->push_back(Point::unit(dim, i, 1));
        } else {
            const Window w = Window::cube(dim, adj.range, Point(dim));
            for_each_in_window(w, [&](const Point& o) {
                if (!o.is_origin()) offs->push_back(o);
            });
        }
        offsets_ = std::move(offs);
    }

    std::size_t dim() const noexcept { return dim_; }
    const Adjacency& adjacency() const noexcept { return adj_; }
    std::size_t degree() const noexcept { return offsets_->size(); }
    const std::vector<Point>& offsets() const noexcept { return *offsets_; }
    const Point& offset(std::size_t k) const noexcept { return (*offsets_)[k]; }
    std::size_t opposite(std::size_t k) const noexcept { return offsets_->size() - 1 - k; }

    /// Index k with offset(k) == diff, or degree() if diff is not a neighbour offset.
    std::size_t offset_index(const Point& diff) const {
        if (diff.dim() != dim_) return degree();
        if (adj_.kind == Adjacency::Kind::nearest) {
            if (diff.l1_norm() != 1) return degree();
            for (std::size_t i = 0; i < dim_; ++i) {
                if (diff[i] == -1) return i;
                if (diff[i] == 1) return 2 * dim_ - 1 - i;
            }
            return degree();
        }
        if (diff.is_origin() || diff.norm() > adj_.range) return degree();
        const std::uint64_t side = 2 * static_cast<std::uint64_t>(adj_.range) + 1;
        std::uint64_t r = 0;
        for (std::size_t i = 0; i < dim_; ++i) r = r * side + static_cast<std::uint64_t>(diff[i] + adj_.range);
        const std::uint64_t centre = degree() / 2;  // mixed-radix value of the origin
        return static_cast<std::size_t>(r > centre ? r - 1 : r);
    }

    void check(const Point& x) const {
        if (x.dim() != dim_)
            throw SpecError("point " + x.to_string() + " does not have lattice dimension " + std::to_string(dim_));
    }

    std::vector<Point> neighbors(const Point& x) const {
        check(x);
        std::vector<Point> out;
        out.reserve(degree());
        for (const auto& o : *offsets_) out.push_back(x + o);
        return out;
    }

    friend bool operator==(const Lattice& a, const Lattice& b) { return a.dim_ == b.dim_ && a.adj_ == b.adj_; }

private:
    std::size_t dim_;
    Adjacency adj_;
    std::shared_ptr<const std::vector<Point>> offsets_;
};

inline std::vector<Point> neighbors(const Point& x, const Lattice& lattice) { return lattice.neighbors(x); }

} // namespace perclab
