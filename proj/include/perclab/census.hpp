#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "perclab/bonds.hpp"
#include "perclab/error.hpp"
#include "perclab/region.hpp"

namespace perclab {

inline constexpr std::uint64_t kDefaultCensusBudget = std::uint64_t{1} << 26;

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0u); }

    std::uint32_t find(std::uint32_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

/// Every open cluster of the subgraph induced by a bounded region.
struct CensusResult {
    Region box = Region::box(0);
    std::int64_t inner = 0;  // r
    std::int64_t outer = 0;  // s
    Window window;
    std::vector<std::int32_t> labels;  // by window index; -1 outside the box
    std::vector<std::uint64_t> sizes;  // by cluster id; ids follow lexicographic order of first member
    std::vector<std::int32_t> spanning_ids;  // clusters meeting both B(r) and dB(s)

    std::int32_t label_of(const Point& x) const {
        if (!window.contains(x)) return -1;
        return labels[window.index_of(x)];
    }
    std::size_t cluster_count() const noexcept { return sizes.size(); }
};

namespace detail {
/// Component labels of the open subgraph induced by `region` inside its window.
template <BondField B>
std::vector<std::int32_t> label_components(const B& bonds, const Region& region, const Window& w,
                                           std::vector<std::uint64_t>& sizes) {
    const Lattice& lat = bonds.lattice();
    const std::uint64_t vol = w.volume();
    std::vector<std::uint8_t> member(vol, 0);
    std::uint64_t idx = 0;
    for_each_in_window(w, [&](const Point& x) { member[idx++] = region.contains(x) ? 1 : 0; });
    UnionFind uf(vol);
    const std::size_t half = lat.degree() / 2;
    idx = 0;
    for_each_in_window(w, [&](const Point& x) {
        const std::uint64_t i = idx++;
        if (!member[i]) return;
        for (std::size_t k = half; k < lat.degree(); ++k) {
            const Point y = x + lat.offset(k);
            if (!w.contains(y)) continue;
            const std::uint64_t j = w.index_of(y);
            if (member[j] && bonds.open(x, k)) uf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    });
    std::vector<std::int32_t> labels(vol, -1);
    std::vector<std::int32_t> root_label(vol, -1);
    sizes.clear();
    for (std::uint64_t i = 0; i < vol; ++i) {
        if (!member[i]) continue;
        const auto r = uf.find(static_cast<std::uint32_t>(i));
        if (root_label[r] < 0) {
            root_label[r] = static_cast<std::int32_t>(sizes.size());
            sizes.push_back(0);
        }
        labels[i] = root_label[r];
        ++sizes[static_cast<std::size_t>(labels[i])];
    }
    return labels;
}
} // namespace detail

/// Union-find census of `box` with spanning clusters of Ann(r, s) (box-restricted connectivity).
template <BondField B>
CensusResult census(const B& bonds, const Region& box, std::int64_t r, std::int64_t s,
                    std::uint64_t budget = kDefaultCensusBudget) {
    const std::size_t d = bonds.lattice().dim();
    require(box.bounded(), "census needs a bounded box, got " + box.to_string());
    require(r >= 0 && s >= r, "census needs 0 <= r <= s");
    const Window w = *box.window(d);
    if (w.volume() > budget || w.volume() > UINT32_MAX)
        throw ResourceError("census of " + box.to_string() + " exceeds the memory budget of " + std::to_string(budget) +
                            " vertices");
    CensusResult out;
    out.box = box;
    out.inner = r;
    out.outer = s;
    out.window = w;
    out.labels = detail::label_components(bonds, box, w, out.sizes);
    std::vector<std::uint8_t> meets_inner(out.sizes.size(), 0), meets_outer(out.sizes.size(), 0);
    std::uint64_t idx = 0;
    for_each_in_window(w, [&](const Point& x) {
        const auto l = out.labels[idx++];
        if (l < 0) return;
        const auto nx = x.norm();
        if (nx <= r) meets_inner[static_cast<std::size_t>(l)] = 1;
        if (nx == s) meets_outer[static_cast<std::size_t>(l)] = 1;
    });
    for (std::size_t c = 0; c < out.sizes.size(); ++c)
        if (meets_inner[c] && meets_outer[c]) out.spanning_ids.push_back(static_cast<std::int32_t>(c));
    return out;
}

/// Per spanning cluster of Ann(n, 3n): X_C, #(C in Ann(3n,5n)) and #(C in B(5n)).
struct SpanningClusterStats {
    std::int32_t id = -1;
    std::uint64_t x_count = 0;
    std::uint64_t outer_volume = 0;
    std::uint64_t ball_volume = 0;

    friend bool operator==(const SpanningClusterStats&, const SpanningClusterStats&) = default;
};

/// X_C counts x in dB(2n) of C with x <-> B(n) inside B(2n); found with a second census of B(2n).
template <BondField B>
std::vector<SpanningClusterStats> spanning_cluster_stats(const CensusResult& cen, const B& bonds, std::int64_t n) {
    const std::size_t d = bonds.lattice().dim();
    const bool box_ok = cen.box.kind() == Region::Kind::box && !cen.box.shift() && cen.box.outer() >= 5 * n;
    if (!box_ok || cen.inner != n || cen.outer != 3 * n)
        throw SpecError("spanning_cluster_stats(n=" + std::to_string(n) + ") needs a census of B(5n + buffer) with r = n, s = 3n");
    std::vector<SpanningClusterStats> out;
    if (cen.spanning_ids.empty()) return out;
    std::vector<std::int32_t> slot(cen.sizes.size(), -1);
    for (const auto id : cen.spanning_ids) {
        slot[static_cast<std::size_t>(id)] = static_cast<std::int32_t>(out.size());
        out.push_back({id, 0, 0, 0});
    }
    std::uint64_t idx = 0;
    for_each_in_window(cen.window, [&](const Point& x) {
        const auto l = cen.labels[idx++];
        if (l < 0 || slot[static_cast<std::size_t>(l)] < 0) return;
        auto& st = out[static_cast<std::size_t>(slot[static_cast<std::size_t>(l)])];
        const auto nx = x.norm();
        if (nx <= 5 * n) ++st.ball_volume;
        if (nx > 3 * n && nx <= 5 * n) ++st.outer_volume;
    });

    const Region inner_box = Region::box(static_cast<double>(2 * n));
    const Window w2 = *inner_box.window(d);
    std::vector<std::uint64_t> sizes2;
    const auto labels2 = detail::label_components(bonds, inner_box, w2, sizes2);
    std::vector<std::uint8_t> reaches(sizes2.size(), 0);
    idx = 0;
    for_each_in_window(w2, [&](const Point& x) {
        const auto l = labels2[idx++];
        if (l >= 0 && x.norm() <= n) reaches[static_cast<std::size_t>(l)] = 1;
    });
    idx = 0;
    for_each_in_window(w2, [&](const Point& x) {
        const auto l = labels2[idx++];
        if (l < 0 || x.norm() != 2 * n || !reaches[static_cast<std::size_t>(l)]) return;
        const auto c = cen.label_of(x);
        if (c >= 0 && slot[static_cast<std::size_t>(c)] >= 0) ++out[static_cast<std::size_t>(slot[static_cast<std::size_t>(c)])].x_count;
    });
    return out;
}

/// Membership in the regular family: X_C >= eta n^2, #(C in Ann(3n,5n)) >= eta n^4,
/// #(C in B(5n)) <= n^4 / eta.
inline bool in_regular_family(const SpanningClusterStats& st, std::int64_t n, double eta) {
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    const double n4 = n2 * n2;
    return static_cast<double>(st.x_count) >= eta * n2 && static_cast<double>(st.outer_volume) >= eta * n4 &&
           static_cast<double>(st.ball_volume) <= n4 / eta;
}

inline std::uint64_t count_regular(const std::vector<SpanningClusterStats>& stats, std::int64_t n, double eta) {
    std::uint64_t c = 0;
    for (const auto& st : stats) c += in_regular_family(st, n, eta) ? 1 : 0;
    return c;
}

} // namespace perclab
