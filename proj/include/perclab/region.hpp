#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perclab/error.hpp"
#include "perclab/lattice.hpp"
#include "perclab/point.hpp"

namespace perclab {

namespace detail {
inline std::int64_t floor_param(double v) {
    require(std::isfinite(v), "region parameter must be finite");
    return static_cast<std::int64_t>(std::floor(v));
}
} // namespace detail

/// Symbolic vertex set. Regions are never materialised; membership is decided by formula.
///
///   Z            all of Z^d
///   Zplus(n)     {x : x(1) >= n}
///   B(n)         {x : |x| <= n}
///   BH(n)        B(n) intersected with Zplus(0)
///   Rect(n)      [0,n] x [-4n,4n]^(d-1)
///   Bminus(n)    -e1 - BH(n)
///   Ann(m,n)     B(n) \ B(m)
///   AnnP(m,n)    B(n) \ Bminus(m)
///   AnnH(m,n)    BH(n) \ BH(m)
///   Box(...)     a general product of integer intervals
///
/// Any region may be translated by a shift; membership of x is then decided for x - shift.
/// Real-valued parameters are floored, so B(3.5) == B(3).
class Region {
public:
    enum class Kind { lattice, half_space, box, half_box, rect, reflected_box, annulus, shifted_annulus, half_annulus, product };

    static Region lattice() { return Region(Kind::lattice, 0, 0); }
    static Region half_space(double n = 0) { return Region(Kind::half_space, 0, detail::floor_param(n)); }
    static Region box(double n) { return Region(Kind::box, 0, detail::floor_param(n)); }
    static Region half_box(double n) { return Region(Kind::half_box, 0, detail::floor_param(n)); }
    static Region rect(double n) { return Region(Kind::rect, 0, detail::floor_param(n)); }
    static Region reflected_box(double n) { return Region(Kind::reflected_box, 0, detail::floor_param(n)); }
    static Region annulus(double m, double n) { return Region(Kind::annulus, detail::floor_param(m), detail::floor_param(n)); }
    static Region shifted_annulus(double m, double n) {
        return Region(Kind::shifted_annulus, detail::floor_param(m), detail::floor_param(n));
    }
    static Region half_annulus(double m, double n) {
        return Region(Kind::half_annulus, detail::floor_param(m), detail::floor_param(n));
    }
    static Region product(std::vector<std::pair<std::int64_t, std::int64_t>> bounds) {
        require(!bounds.empty() && bounds.size() <= kMaxDim, "product region needs 1..kMaxDim intervals");
        Region r(Kind::product, 0, 0);
        r.bounds_ = std::move(bounds);
        return r;
    }

    /// x + R. A zero shift is dropped so that equal sets compare equal.
    Region shifted(const Point& s) const {
        Region r = *this;
        if (r.shift_) {
            r.shift_->check_dim(s);
            *r.shift_ += s;
        } else {
            r.shift_ = s;
        }
        if (r.shift_->is_origin()) r.shift_.reset();
        return r;
    }

    Kind kind() const noexcept { return kind_; }
    std::int64_t inner() const noexcept { return m_; }
    std::int64_t outer() const noexcept { return n_; }
    const std::optional<Point>& shift() const noexcept { return shift_; }
    const std::vector<std::pair<std::int64_t, std::int64_t>>& bounds() const noexcept { return bounds_; }

    bool bounded() const noexcept { return kind_ != Kind::lattice && kind_ != Kind::half_space; }

    bool contains(const Point& x) const {
        if (shift_) {
            x.check_dim(*shift_);
            return contains_unshifted(x - *shift_);
        }
        return contains_unshifted(x);
    }

    /// Smallest window containing the region in dimension d; nullopt when unbounded.
    std::optional<Window> window(std::size_t d) const {
        auto w = window_unshifted(d);
        if (w && shift_) {
            require(shift_->dim() == d, "shift dimension does not match " + std::to_string(d));
            return w->shifted(*shift_);
        }
        return w;
    }

    /// Largest l-inf norm of a member (for bounded regions).
    std::int64_t radius(std::size_t d) const {
        const auto w = window(d);
        require(w.has_value(), "radius of unbounded region " + to_string());
        std::int64_t r = 0;
        for (std::size_t i = 0; i < d; ++i) r = std::max({r, std::abs(std::int64_t{w->lo[i]}), std::abs(std::int64_t{w->hi[i]})});
        return r;
    }

    std::string to_string() const {
        std::string s;
        const auto one = [&](const char* name) { s = std::string(name) + "(n=" + std::to_string(n_) + ")"; };
        const auto two = [&](const char* name) {
            s = std::string(name) + "(m=" + std::to_string(m_) + ",n=" + std::to_string(n_) + ")";
        };
        switch (kind_) {
        case Kind::lattice: s = "Z"; break;
        case Kind::half_space: one("Zplus"); break;
        case Kind::box: one("B"); break;
        case Kind::half_box: one("BH"); break;
        case Kind::rect: one("Rect"); break;
        case Kind::reflected_box: one("Bminus"); break;
        case Kind::annulus: two("Ann"); break;
        case Kind::shifted_annulus: two("AnnP"); break;
        case Kind::half_annulus: two("AnnH"); break;
        case Kind::product:
            s = "Box(";
            for (std::size_t i = 0; i < bounds_.size(); ++i) {
                if (i) s += 'x';
                s += "[" + std::to_string(bounds_[i].first) + "," + std::to_string(bounds_[i].second) + "]";
            }
            s += ")";
            break;
        }
        if (shift_) {
            const auto c = shift_->to_string();
            s += "+shift" + c;
        }
        return s;
    }

    static Region parse(std::string_view text);

    friend bool operator==(const Region& a, const Region& b) {
        return a.kind_ == b.kind_ && a.m_ == b.m_ && a.n_ == b.n_ && a.bounds_ == b.bounds_ && a.shift_ == b.shift_;
    }

private:
    Region(Kind k, std::int64_t m, std::int64_t n) : kind_(k), m_(m), n_(n) {}

    static bool in_box(const Point& y, std::int64_t n) { return y.norm() <= n; }
    static bool in_half_box(const Point& y, std::int64_t n) { return y[0] >= 0 && y.norm() <= n; }
    static bool in_reflected_box(const Point& y, std::int64_t n) {
        if (y[0] > -1 || y[0] < -1 - n) return false;
        for (std::size_t i = 1; i < y.dim(); ++i)
            if (std::abs(std::int64_t{y[i]}) > n) return false;
        return true;
    }

    bool contains_unshifted(const Point& y) const {
        switch (kind_) {
        case Kind::lattice: return true;
        case Kind::half_space: return y[0] >= n_;
        case Kind::box: return in_box(y, n_);
        case Kind::half_box: return in_half_box(y, n_);
        case Kind::rect: {
            if (y[0] < 0 || y[0] > n_) return false;
            for (std::size_t i = 1; i < y.dim(); ++i)
                if (std::abs(std::int64_t{y[i]}) > 4 * n_) return false;
            return true;
        }
        case Kind::reflected_box: return in_reflected_box(y, n_);
        case Kind::annulus: return in_box(y, n_) && !in_box(y, m_);
        case Kind::shifted_annulus: return in_box(y, n_) && !in_reflected_box(y, m_);
        case Kind::half_annulus: return in_half_box(y, n_) && !in_half_box(y, m_);
        case Kind::product: {
            if (y.dim() != bounds_.size())
                throw SpecError("point " + y.to_string() + " does not match dimension of " + to_string());
            for (std::size_t i = 0; i < y.dim(); ++i)
                if (y[i] < bounds_[i].first || y[i] > bounds_[i].second) return false;
            return true;
        }
        }
        return false;
    }

    std::optional<Window> window_unshifted(std::size_t d) const {
        Window w{Point(d), Point(d)};
        const auto fill = [&](std::int64_t lo0, std::int64_t hi0, std::int64_t lo, std::int64_t hi) {
            w.lo[0] = static_cast<Coord>(lo0);
            w.hi[0] = static_cast<Coord>(hi0);
            for (std::size_t i = 1; i < d; ++i) {
                w.lo[i] = static_cast<Coord>(lo);
                w.hi[i] = static_cast<Coord>(hi);
            }
        };
        switch (kind_) {
        case Kind::lattice:
        case Kind::half_space: return std::nullopt;
        case Kind::box:
        case Kind::annulus:
        case Kind::shifted_annulus: fill(-n_, n_, -n_, n_); break;
        case Kind::half_box:
        case Kind::half_annulus: fill(0, n_, -n_, n_); break;
        case Kind::rect: fill(0, n_, -4 * n_, 4 * n_); break;
        case Kind::reflected_box: fill(-1 - n_, -1, -n_, n_); break;
        case Kind::product:
            require(bounds_.size() == d, "product region " + to_string() + " is not " + std::to_string(d) + "-dimensional");
            for (std::size_t i = 0; i < d; ++i) {
                w.lo[i] = static_cast<Coord>(bounds_[i].first);
                w.hi[i] = static_cast<Coord>(bounds_[i].second);
            }
            break;
        }
        return w;
    }

    Kind kind_;
    std::int64_t m_ = 0;
    std::int64_t n_ = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> bounds_;
    std::optional<Point> shift_;
};

/// Symbolic boundary vertex set.
///
///   dB(n)        {x : |x| = n}
///   S(n)         {x : x(1) = n}
///   Sp(n)        S'(n) = Zplus(0) intersected with dB(n)
///   dBminus(n)   -e1 - dBH(n), where dBH(n) is the boundary of BH(n) relative to Z^d
///   rel(A0;A1;adj)  {x in A0 : some neighbour of x lies in A1 \ A0}
///   custom(name) arbitrary predicate, no text round trip
class Boundary {
public:
    enum class Kind { sphere, plane, half_sphere, reflected_half_boundary, relative, custom };

    static Boundary sphere(double n) { return Boundary(Kind::sphere, detail::floor_param(n)); }
    static Boundary plane(double n) { return Boundary(Kind::plane, detail::floor_param(n)); }
    static Boundary half_sphere(double n) { return Boundary(Kind::half_sphere, detail::floor_param(n)); }
    static Boundary reflected_half_boundary(double n) {
        return Boundary(Kind::reflected_half_boundary, detail::floor_param(n));
    }
    static Boundary relative(const Region& a0, const Region& a1, const Adjacency& adj) {
        Boundary b(Kind::relative, 0);
        b.sets_ = std::make_shared<const std::pair<Region, Region>>(a0, a1);
        b.adj_ = adj;
        return b;
    }
    static Boundary custom(std::string name, std::function<bool(const Point&)> pred,
                           std::optional<Window> window = std::nullopt) {
        Boundary b(Kind::custom, 0);
        b.name_ = std::move(name);
        b.pred_ = std::move(pred);
        b.custom_window_ = std::move(window);
        return b;
    }

    /// Outer boundary of a box or annulus: dB(n) for B, Ann, AnnP; S'(n) for BH and AnnH.
    static Boundary outer(const Region& r) {
        Boundary b = [&] {
            switch (r.kind()) {
            case Region::Kind::box:
            case Region::Kind::annulus:
            case Region::Kind::shifted_annulus: return sphere(static_cast<double>(r.outer()));
            case Region::Kind::half_box:
            case Region::Kind::half_annulus: return half_sphere(static_cast<double>(r.outer()));
            default: throw SpecError("no outer boundary defined for " + r.to_string());
            }
        }();
        return r.shift() ? b.shifted(*r.shift()) : b;
    }

    /// Inner boundary of an annulus: dB(m+1), S'(m+1), or -e1 - dBH(m+1).
    static Boundary inner(const Region& r) {
        Boundary b = [&] {
            const auto m1 = static_cast<double>(r.inner() + 1);
            switch (r.kind()) {
            case Region::Kind::annulus: return sphere(m1);
            case Region::Kind::half_annulus: return half_sphere(m1);
            case Region::Kind::shifted_annulus: return reflected_half_boundary(m1);
            default: throw SpecError("no inner boundary defined for " + r.to_string());
            }
        }();
        return r.shift() ? b.shifted(*r.shift()) : b;
    }

    Boundary shifted(const Point& s) const {
        Boundary b = *this;
        if (b.shift_) {
            b.shift_->check_dim(s);
            *b.shift_ += s;
        } else {
            b.shift_ = s;
        }
        if (b.shift_->is_origin()) b.shift_.reset();
        return b;
    }

    Kind kind() const noexcept { return kind_; }
    std::int64_t param() const noexcept { return n_; }
    const std::optional<Point>& shift() const noexcept { return shift_; }

    bool bounded() const noexcept {
        switch (kind_) {
        case Kind::plane: return false;
        case Kind::relative: return sets_->first.bounded();
        case Kind::custom: return custom_window_.has_value();
        default: return true;
        }
    }

    /// Membership. For a relative boundary, throws if x lies in A0 but not in A1.
    bool contains(const Point& x) const {
        if (shift_) {
            x.check_dim(*shift_);
            return contains_unshifted(x - *shift_);
        }
        return contains_unshifted(x);
    }

    std::optional<Window> window(std::size_t d) const {
        std::optional<Window> w;
        switch (kind_) {
        case Kind::sphere: w = Region::box(static_cast<double>(n_)).window(d); break;
        case Kind::plane: return std::nullopt;
        case Kind::half_sphere: w = Region::half_box(static_cast<double>(n_)).window(d); break;
        case Kind::reflected_half_boundary: w = Region::reflected_box(static_cast<double>(n_)).window(d); break;
        case Kind::relative: w = sets_->first.window(d); break;
        case Kind::custom: w = custom_window_; break;
        }
        if (w && shift_) return w->shifted(*shift_);
        return w;
    }

    std::string to_string() const {
        std::string s;
        switch (kind_) {
        case Kind::sphere: s = "dB(n=" + std::to_string(n_) + ")"; break;
        case Kind::plane: s = "S(n=" + std::to_string(n_) + ")"; break;
        case Kind::half_sphere: s = "Sp(n=" + std::to_string(n_) + ")"; break;
        case Kind::reflected_half_boundary: s = "dBminus(n=" + std::to_string(n_) + ")"; break;
        case Kind::relative:
            s = "rel(" + sets_->first.to_string() + ";" + sets_->second.to_string() + ";" + adj_.to_string() + ")";
            break;
        case Kind::custom: s = "custom(" + name_ + ")"; break;
        }
        if (shift_) s += "+shift" + shift_->to_string();
        return s;
    }

    static Boundary parse(std::string_view text);

    friend bool operator==(const Boundary& a, const Boundary& b) {
        if (a.kind_ != b.kind_ || a.n_ != b.n_ || a.shift_ != b.shift_) return false;
        if (a.kind_ == Kind::relative) return *a.sets_ == *b.sets_ && a.adj_ == b.adj_;
        if (a.kind_ == Kind::custom) return a.name_ == b.name_;
        return true;
    }

private:
    Boundary(Kind k, std::int64_t n) : kind_(k), n_(n) {}

    bool contains_unshifted(const Point& y) const {
        switch (kind_) {
        case Kind::sphere: return y.norm() == n_;
        case Kind::plane: return y[0] == n_;
        case Kind::half_sphere: return y[0] >= 0 && y.norm() == n_;
        case Kind::reflected_half_boundary: {
            Point z = -y;
            z[0] -= 1;
            if (z[0] < 0 || z.norm() > n_) return false;
            return z[0] == 0 || z.norm() == n_;
        }
        case Kind::relative: return relative_contains(y);
        case Kind::custom: return pred_(y);
        }
        return false;
    }

    bool relative_contains(const Point& y) const {
        const auto& [a0, a1] = *sets_;
        if (!a0.contains(y)) return false;
        if (!a1.contains(y))
            throw SpecError("relative boundary: " + y.to_string() + " lies in " + a0.to_string() + " but not in " +
                            a1.to_string());
        const std::size_t d = y.dim();
        const auto probe = [&](const Point& z) { return a1.contains(z) && !a0.contains(z); };
        if (adj_.kind == Adjacency::Kind::nearest) {
            Point z = y;
            for (std::size_t i = 0; i < d; ++i) {
                z[i] = y[i] - 1;
                if (probe(z)) return true;
                z[i] = y[i] + 1;
                if (probe(z)) return true;
                z[i] = y[i];
            }
            return false;
        }
        bool found = false;
        const Window w = Window::cube(d, adj_.range, y);
        for_each_in_window(w, [&](const Point& z) {
            if (!found && z != y && probe(z)) found = true;
        });
        return found;
    }

    Kind kind_;
    std::int64_t n_ = 0;
    std::optional<Point> shift_;
    std::shared_ptr<const std::pair<Region, Region>> sets_;
    Adjacency adj_;
    std::string name_;
    std::function<bool(const Point&)> pred_;
    std::optional<Window> custom_window_;
};

/// The relative boundary of A0 in A1 under the given adjacency, as a queryable predicate.
inline Boundary relative_boundary(const Region& a0, const Region& a1, const Adjacency& adj) {
    return Boundary::relative(a0, a1, adj);
}

// Text parsing ---------------------------------------------------------------------------------

namespace detail {

class TextCursor {
public:
    explicit TextCursor(std::string_view s) : s_(s) {}

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }
    std::size_t pos() const { return pos_; }
    std::string_view rest() const { return s_.substr(pos_); }

    bool accept(std::string_view tok) {
        if (s_.substr(pos_).starts_with(tok)) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    void expect(std::string_view tok) {
        if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
    }

    std::string identifier() {
        const std::size_t start = pos_;
        while (!done() && (std::isalpha(static_cast<unsigned char>(peek())) != 0)) ++pos_;
        if (start == pos_) fail("expected a name");
        return std::string(s_.substr(start, pos_ - start));
    }

    /// Signed decimal, possibly with a fractional part.
    double number() {
        const std::size_t start = pos_;
        if (peek() == '-' || peek() == '+') ++pos_;
        while (!done() && (std::isdigit(static_cast<unsigned char>(peek())) != 0 || peek() == '.')) ++pos_;
        const std::string tok(s_.substr(start, pos_ - start));
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used == tok.size()) return v;
        } catch (const std::exception&) {
        }
        pos_ = start;
        fail("expected a number");
    }

    std::int64_t integer() {
        const double v = number();
        if (v != std::floor(v)) fail("expected an integer");
        return static_cast<std::int64_t>(v);
    }

    /// Reads up to (not including) the first top-level occurrence of one of `stops`.
    std::string_view balanced_until(std::string_view stops) {
        const std::size_t start = pos_;
        int depth = 0;
        while (!done()) {
            const char c = peek();
            if (c == '(' || c == '[') ++depth;
            if (c == ')' || c == ']') {
                if (depth == 0 && stops.find(c) != std::string_view::npos) break;
                --depth;
            } else if (depth == 0 && stops.find(c) != std::string_view::npos) {
                break;
            }
            ++pos_;
        }
        return s_.substr(start, pos_ - start);
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw SpecError("cannot parse '" + std::string(s_) + "' at offset " + std::to_string(pos_) + ": " + what);
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

inline std::optional<Point> parse_shift(TextCursor& c) {
    if (!c.accept("+shift(")) return std::nullopt;
    std::vector<std::int64_t> coords;
    do {
        coords.push_back(c.integer());
    } while (c.accept(","));
    c.expect(")");
    if (coords.size() > kMaxDim) c.fail("shift has too many coordinates");
    return Point::from(std::span<const std::int64_t>(coords));
}

inline double named_param(TextCursor& c, std::string_view key) {
    c.expect(key);
    c.expect("=");
    return c.number();
}

inline Region parse_region(TextCursor& c) {
    using R = Region;
    const std::string name = c.identifier();
    Region r = R::lattice();
    if (name == "Z") {
        r = R::lattice();
    } else if (name == "Box") {
        c.expect("(");
        std::vector<std::pair<std::int64_t, std::int64_t>> bounds;
        do {
            c.expect("[");
            const auto a = c.integer();
            c.expect(",");
            const auto b = c.integer();
            c.expect("]");
            bounds.emplace_back(a, b);
        } while (c.accept("x"));
        c.expect(")");
        r = R::product(std::move(bounds));
    } else if (name == "Ann" || name == "AnnP" || name == "AnnH") {
        c.expect("(");
        const double m = named_param(c, "m");
        c.expect(",");
        const double n = named_param(c, "n");
        c.expect(")");
        r = name == "Ann" ? R::annulus(m, n) : name == "AnnP" ? R::shifted_annulus(m, n) : R::half_annulus(m, n);
    } else {
        c.expect("(");
        const double n = named_param(c, "n");
        c.expect(")");
        if (name == "Zplus") r = R::half_space(n);
        else if (name == "B") r = R::box(n);
        else if (name == "BH") r = R::half_box(n);
        else if (name == "Rect") r = R::rect(n);
        else if (name == "Bminus") r = R::reflected_box(n);
        else c.fail("unknown region kind '" + name + "'");
    }
    if (auto s = parse_shift(c)) r = r.shifted(*s);
    return r;
}

inline Boundary parse_boundary(TextCursor& c) {
    using B = Boundary;
    const std::string name = c.identifier();
    Boundary b = B::sphere(0);
    if (name == "rel") {
        c.expect("(");
        const Region a0 = parse_region(c);
        c.expect(";");
        const Region a1 = parse_region(c);
        c.expect(";");
        const auto adj = Adjacency::parse(c.balanced_until(")"));
        c.expect(")");
        b = B::relative(a0, a1, adj);
    } else if (name == "custom") {
        c.fail("custom boundaries have no text form");
    } else {
        c.expect("(");
        const double n = named_param(c, "n");
        c.expect(")");
        if (name == "dB") b = B::sphere(n);
        else if (name == "S") b = B::plane(n);
        else if (name == "Sp") b = B::half_sphere(n);
        else if (name == "dBminus") b = B::reflected_half_boundary(n);
        else c.fail("unknown boundary kind '" + name + "'");
    }
    if (auto s = parse_shift(c)) b = b.shifted(*s);
    return b;
}

} // namespace detail

inline Region Region::parse(std::string_view text) {
    detail::TextCursor c(text);
    Region r = detail::parse_region(c);
    if (!c.done()) c.fail("trailing characters");
    return r;
}

inline Boundary Boundary::parse(std::string_view text) {
    detail::TextCursor c(text);
    Boundary b = detail::parse_boundary(c);
    if (!c.done()) c.fail("trailing characters");
    return b;
}

// Enumeration ----------------------------------------------------------------------------------

/// Calls f on every member of a bounded Region or Boundary in lexicographic order.
template <class Set, class F>
void for_each_member(const Set& set, std::size_t d, F&& f) {
    const auto w = set.window(d);
    if (!w) throw SpecError("cannot enumerate unbounded set " + set.to_string());
    for_each_in_window(*w, [&](const Point& x) {
        if (set.contains(x)) f(x);
    });
}

template <class Set>
std::vector<Point> enumerate_region(const Set& set, std::size_t d) {
    std::vector<Point> out;
    for_each_member(set, d, [&](const Point& x) { out.push_back(x); });
    return out;
}

template <class Set>
std::uint64_t count_members(const Set& set, std::size_t d) {
    std::uint64_t n = 0;
    for_each_member(set, d, [&](const Point&) { ++n; });
    return n;
}

} // namespace perclab
