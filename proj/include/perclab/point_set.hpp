#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "perclab/point.hpp"

namespace perclab {

/// Insert-only set of lattice points sized to what is inserted, not to the region.
/// Points inside a small known window use a stamped dense table; everything else goes to an
/// open-addressing hash table.
class PointSet {
public:
    static constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 22;

    PointSet() = default;
    explicit PointSet(const std::optional<Window>& window) { reset(window); }

    void reset(const std::optional<Window>& window) {
        size_ = 0;
        dense_ = window && !window->empty() && window->volume() <= kDenseLimit;
        if (dense_) {
            window_ = *window;
            const auto vol = window_.volume();
            if (stamps_.size() < vol) stamps_.assign(vol, 0);
            if (++epoch_ == 0) {
                std::fill(stamps_.begin(), stamps_.end(), 0);
                epoch_ = 1;
            }
        } else {
            if (slots_.empty()) {
                slots_.assign(64, Point());
                used_.assign(64, 0);
            }
            for (const auto i : touched_) used_[i] = 0;
            touched_.clear();
        }
    }

    std::size_t size() const noexcept { return size_; }

    bool contains(const Point& x) const {
        if (dense_) return window_.contains(x) && stamps_[window_.index_of(x)] == epoch_;
        std::size_t mask = slots_.size() - 1;
        for (std::size_t i = PointHash{}(x) & mask;; i = (i + 1) & mask) {
            if (!used_[i]) return false;
            if (slots_[i] == x) return true;
        }
    }

    /// True if x was not already present.
    bool insert(const Point& x) {
        if (dense_) {
            auto& s = stamps_[window_.index_of(x)];
            if (s == epoch_) return false;
            s = epoch_;
            ++size_;
            return true;
        }
        if (2 * (size_ + 1) > slots_.size()) grow();
        return insert_hashed(x);
    }

private:
    bool insert_hashed(const Point& x) {
        const std::size_t mask = slots_.size() - 1;
        for (std::size_t i = PointHash{}(x) & mask;; i = (i + 1) & mask) {
            if (!used_[i]) {
                used_[i] = 1;
                touched_.push_back(i);
                slots_[i] = x;
                ++size_;
                return true;
            }
            if (slots_[i] == x) return false;
        }
    }

    void grow() {
        std::vector<Point> old;
        old.reserve(size_);
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (used_[i]) old.push_back(slots_[i]);
        const std::size_t n = slots_.size() * 2;
        slots_.assign(n, Point());
        used_.assign(n, 0);
        touched_.clear();
        size_ = 0;
        for (const auto& p : old) insert_hashed(p);
    }

    bool dense_ = false;
    Window window_;
    std::vector<std::uint32_t> stamps_;
    std::uint32_t epoch_ = 0;
    std::vector<Point> slots_;
    std::vector<std::uint8_t> used_;
    std::vector<std::size_t> touched_;
    std::size_t size_ = 0;
};

} // namespace perclab
