#include "mimo/constellation.hpp"

#include <cmath>
#include <limits>

namespace mimo {

Constellation Constellation::make(std::uint32_t order) {
    if (order != 4 && order != 16 && order != 64) {
        throw ContractError("make_constellation: unsupported order " + std::to_string(order) +
                            " (expected 4, 16 or 64)");
    }
    Constellation c;
    c.order_ = order;
    c.k_ = static_cast<std::uint32_t>(std::lround(std::sqrt(double(order))));
    // Unit average power: E|x|^2 = 2 (k^2 - 1) / 3 over odd levels, so
    // scale = sqrt(3 / (2 (M - 1))).
    c.scale_ = std::sqrt(3.0 / (2.0 * (double(order) - 1.0)));
    c.levels_.resize(c.k_);
    for (std::uint32_t i = 0; i < c.k_; ++i) {
        c.levels_[i] = c.scale_ * (2.0 * double(i) - double(c.k_ - 1));
    }
    c.points_.resize(order);
    for (std::uint32_t im = 0; im < c.k_; ++im) {
        for (std::uint32_t re = 0; re < c.k_; ++re) {
            c.points_[im * c.k_ + re] = CplxScalar(c.levels_[re], c.levels_[im]);
        }
    }
    c.max_mag_ = std::abs(c.points_.back());
    c.half_min_dist_ = c.scale_; // adjacent levels are 2*scale apart
    return c;
}

std::uint32_t Constellation::nearest_level(double v) const noexcept {
    // Levels are uniform over [-(k-1), k-1] x scale with spacing 2*scale.
    // A strict < comparison on the midpoint sends exact ties to the
    // smaller level, which is the lexicographic-minimum rule.
    const double pos = (v / scale_ + double(k_ - 1)) / 2.0;
    if (pos <= 0.0) return 0;
    if (pos >= double(k_ - 1)) return k_ - 1;
    const auto lo = static_cast<std::uint32_t>(pos);
    const double mid = double(lo) + 0.5;
    return (pos > mid) ? lo + 1 : lo;
}

std::uint32_t Constellation::nearest(CplxScalar z) const noexcept {
    return index_from_levels(nearest_level(z.real()), nearest_level(z.imag()));
}

Constellation make_constellation(std::uint32_t order) { return Constellation::make(order); }

SymbolVector hard_decision(const CplxVector& z, const Constellation& c) {
    SymbolVector out;
    out.indices.resize(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        out.indices[static_cast<std::size_t>(i)] = c.nearest(z(i));
    }
    return out;
}

SymbolVector sample_symbols(const Constellation& c, std::size_t n_t, RngStream& rng) {
    if (n_t < 1) throw ContractError("sample_symbols: n_t must be >= 1");
    SymbolVector out;
    out.indices.resize(n_t);
    for (std::size_t i = 0; i < n_t; ++i) out.indices[i] = rng.index_pow2(c.order());
    return out;
}

double ser(const SymbolVector& estimate, const SymbolVector& truth) {
    if (estimate.size() != truth.size()) {
        throw ContractError("ser: length mismatch (" + std::to_string(estimate.size()) +
                            " vs " + std::to_string(truth.size()) + ")");
    }
    if (estimate.size() == 0) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        if (estimate.indices[i] != truth.indices[i]) ++wrong;
    }
    return double(wrong) / double(estimate.size());
}

CplxVector to_points(const SymbolVector& s, const Constellation& c) {
    CplxVector out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = c.point(s.indices[i]);
    }
    return out;
}

} // namespace mimo
