#pragma once

#include <cstdint>
#include <vector>

#include "mimo/numerics.hpp"
#include "mimo/rng.hpp"

namespace mimo {

/// Transmitted symbols as indices into a Constellation's point table.
struct SymbolVector {
    std::vector<std::uint32_t> indices;

    std::size_t size() const noexcept { return indices.size(); }
    bool operator==(const SymbolVector&) const = default;
};

/// Square QAM alphabet normalized to unit average power.
///
/// Points are ordered row-major over the amplitude grid with the real
/// axis fastest: index i maps to level pair (i % k, i / k) with k = sqrt(M)
/// and levels ascending {-(k-1), ..., -1, +1, ..., +(k-1)} x scale.
class Constellation {
public:
    /// order must be one of {4, 16, 64}.
    static Constellation make(std::uint32_t order);

    std::uint32_t order() const noexcept { return order_; }
    const std::vector<CplxScalar>& points() const noexcept { return points_; }
    CplxScalar point(std::uint32_t idx) const { return points_.at(idx); }
    double scale() const noexcept { return scale_; }

    /// Per-axis amplitude levels, ascending (already scaled).
    const std::vector<double>& levels() const noexcept { return levels_; }
    std::uint32_t levels_per_axis() const noexcept { return k_; }

    /// Index of the nearest point to z (Euclidean). Ties break toward the
    /// smallest (re, im) lexicographically.
    std::uint32_t nearest(CplxScalar z) const noexcept;

    /// Nearest level index along one real axis, ties toward the smaller level.
    std::uint32_t nearest_level(double v) const noexcept;

    /// Maximum point magnitude (corner point).
    double max_magnitude() const noexcept { return max_mag_; }

    /// Half the minimum distance between distinct points.
    double half_min_distance() const noexcept { return half_min_dist_; }

    /// Compose a point index from per-axis level indices.
    std::uint32_t index_from_levels(std::uint32_t re_idx, std::uint32_t im_idx) const noexcept {
        return im_idx * k_ + re_idx;
    }

private:
    Constellation() = default;

    std::uint32_t order_ = 0;
    std::uint32_t k_ = 0;
    double scale_ = 0.0;
    double max_mag_ = 0.0;
    double half_min_dist_ = 0.0;
    std::vector<double> levels_;
    std::vector<CplxScalar> points_;
};

Constellation make_constellation(std::uint32_t order);

/// Element-wise nearest-point decision.
SymbolVector hard_decision(const CplxVector& z, const Constellation& c);

/// n_t i.i.d. uniform symbol draws.
SymbolVector sample_symbols(const Constellation& c, std::size_t n_t, RngStream& rng);

/// Fraction of positions where the decisions differ.
double ser(const SymbolVector& estimate, const SymbolVector& truth);

/// Symbol indices -> complex point vector.
CplxVector to_points(const SymbolVector& s, const Constellation& c);

} // namespace mimo
