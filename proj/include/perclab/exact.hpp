#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "perclab/bonds.hpp"
#include "perclab/error.hpp"

namespace perclab {

inline constexpr std::size_t kMaxExactEdges = 24;

/// sum over configurations of f, grouped by the number of open edges:
/// E_p[f] = sum_k coeff[k] p^k (1-p)^(m-k).
struct ExactPolynomial {
    std::vector<long double> coeff;

    std::size_t edges() const noexcept { return coeff.empty() ? 0 : coeff.size() - 1; }

    long double at(long double p) const {
        const std::size_t m = edges();
        long double s = 0;
        for (std::size_t k = 0; k <= m; ++k)
            if (coeff[k] != 0) s += coeff[k] * std::pow(p, static_cast<long double>(k)) * std::pow(1 - p, static_cast<long double>(m - k));
        return s;
    }

    /// Exact value at p = a/b as a reduced fraction, when the coefficients are integers and
    /// nothing overflows 128 bits.
    std::optional<std::pair<unsigned __int128, unsigned __int128>> rational(std::uint64_t a, std::uint64_t b) const {
        if (b == 0 || a > b) return std::nullopt;
        using u128 = unsigned __int128;
        const std::size_t m = edges();
        const auto mul = [](u128 x, u128 y) -> std::optional<u128> {
            if (x != 0 && y > ~u128{0} / x) return std::nullopt;
            return x * y;
        };
        const auto power = [&](u128 base, std::size_t e) -> std::optional<u128> {
            u128 r = 1;
            for (std::size_t i = 0; i < e; ++i) {
                const auto t = mul(r, base);
                if (!t) return std::nullopt;
                r = *t;
            }
            return r;
        };
        u128 num = 0;
        for (std::size_t k = 0; k <= m; ++k) {
            const long double c = coeff[k];
            if (c != std::floor(c) || c < 0) return std::nullopt;
            if (c == 0) continue;
            const auto pa = power(a, k), pb = power(b - a, m - k);
            if (!pa || !pb) return std::nullopt;
            const auto t1 = mul(*pa, *pb);
            if (!t1) return std::nullopt;
            const auto t2 = mul(*t1, static_cast<u128>(c));
            if (!t2 || num > ~u128{0} - *t2) return std::nullopt;
            num += *t2;
        }
        auto den = power(b, m);
        if (!den) return std::nullopt;
        u128 g = num, h = *den;
        while (h != 0) {
            const u128 t = g % h;
            g = h;
            h = t;
        }
        if (g == 0) return std::pair<u128, u128>{0, 1};
        return std::pair<u128, u128>{num / g, *den / g};
    }
};

/// Visits all 2^m states of `edges` (every other edge closed). visit(const MaskBonds&) -> double.
template <class F>
ExactPolynomial exact_sum(const Lattice& lattice, const std::vector<Edge>& edges, F&& f) {
    if (edges.size() > kMaxExactEdges)
        throw ResourceError("exact enumeration is limited to " + std::to_string(kMaxExactEdges) + " edges, got " +
                            std::to_string(edges.size()));
    MaskBonds bonds(lattice, edges);
    ExactPolynomial poly;
    poly.coeff.assign(edges.size() + 1, 0);
    const std::uint64_t total = std::uint64_t{1} << edges.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        bonds.set_mask(mask);
        poly.coeff[static_cast<std::size_t>(std::popcount(mask))] += static_cast<long double>(f(static_cast<const MaskBonds&>(bonds)));
    }
    return poly;
}

/// P_p(event) over the edge set; event(const MaskBonds&) -> bool.
template <class Event>
long double enumerate_exact(const Lattice& lattice, const std::vector<Edge>& edges, double p, Event&& event) {
    return exact_sum(lattice, edges, [&](const MaskBonds& b) { return event(b) ? 1.0 : 0.0; }).at(p);
}

template <class F>
long double exact_expectation(const Lattice& lattice, const std::vector<Edge>& edges, double p, F&& f) {
    return exact_sum(lattice, edges, f).at(p);
}

/// Law of an integer-valued observable; value(const MaskBonds&) -> uint64.
template <class F>
std::map<std::uint64_t, long double> exact_distribution(const Lattice& lattice, const std::vector<Edge>& edges,
                                                        double p, F&& value) {
    if (edges.size() > kMaxExactEdges)
        throw ResourceError("exact enumeration is limited to " + std::to_string(kMaxExactEdges) + " edges");
    MaskBonds bonds(lattice, edges);
    const std::size_t m = edges.size();
    std::vector<long double> weight(m + 1);
    for (std::size_t k = 0; k <= m; ++k)
        weight[k] = std::pow(static_cast<long double>(p), static_cast<long double>(k)) *
                    std::pow(1 - static_cast<long double>(p), static_cast<long double>(m - k));
    std::map<std::uint64_t, long double> law;
    const std::uint64_t total = std::uint64_t{1} << m;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        bonds.set_mask(mask);
        law[value(static_cast<const MaskBonds&>(bonds))] += weight[static_cast<std::size_t>(std::popcount(mask))];
    }
    return law;
}

} // namespace perclab
