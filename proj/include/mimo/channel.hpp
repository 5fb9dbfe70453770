#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimo/numerics.hpp"
#include "mimo/rng.hpp"

namespace mimo {

struct ChannelRealization {
    CplxMatrix h;            // N_r x N_t complex gains
    std::uint32_t freq_index = 0;
    std::uint32_t time_index = 0;
};

/// F x T array of channel matrices modeling spectral/temporal locality.
/// After generation the grid is renormalized so the grid average of
/// |H|_F^2 / (N_r N_t) equals one.
struct ChannelGrid {
    std::uint32_t f_count = 0;
    std::uint32_t t_count = 0;
    std::vector<ChannelRealization> cells; // indexed cell(f, t)

    const ChannelRealization& cell(std::uint32_t f, std::uint32_t t) const {
        return cells.at(std::size_t(f) * t_count + t);
    }
    ChannelRealization& cell(std::uint32_t f, std::uint32_t t) {
        return cells.at(std::size_t(f) * t_count + t);
    }
    std::uint32_t n_r() const { return std::uint32_t(cells.at(0).h.rows()); }
    std::uint32_t n_t() const { return std::uint32_t(cells.at(0).h.cols()); }
};

struct NoiseSpec {
    double sigma2 = 0.0; // noise variance per complex receive dimension
    double snr_db = 0.0;
};

/// Entries i.i.d. CN(0, 1/N_r): each column has unit expected norm.
ChannelRealization gen_iid_gaussian(std::uint32_t n_r, std::uint32_t n_t, RngStream& rng);

/// Kronecker-correlated channel R_r^{1/2} W R_t^{1/2} with exponential
/// correlation profiles R[i][j] = rho^|i-j| and W as in gen_iid_gaussian.
/// rho_r = rho_t = 0 reproduces gen_iid_gaussian bit-for-bit on the same
/// stream.
ChannelRealization gen_kronecker(std::uint32_t n_r, std::uint32_t n_t, double rho_r,
                                 double rho_t, RngStream& rng);

/// Exponential correlation matrix R[i][j] = rho^|i-j|.
RealMatrix exp_correlation(std::uint32_t n, double rho);

/// Grid of Kronecker-shaped channels whose entries evolve as first-order
/// Gauss-Markov processes along the frequency and time axes with per-step
/// correlations corr_f and corr_t. Marginal cell distribution matches
/// gen_kronecker(rho_r, rho_t); the grid is normalized afterwards.
ChannelGrid gen_correlated_grid(std::uint32_t n_r, std::uint32_t n_t, std::uint32_t f_count,
                                std::uint32_t t_count, double rho_r, double rho_t,
                                double corr_f, double corr_t, RngStream& rng);

/// Noise variance realizing SNR(dB) = 10 log10(E|Hx|^2 / E|n|^2) with
/// unit-power symbols: sigma2 = |H|_F^2 / (N_r 10^{snr/10}). Uses the
/// realized Frobenius norm, not its expectation.
double sigma2_from_snr(const CplxMatrix& h, double snr_db);

/// y = H x + n with n ~ CN(0, sigma2 I): each complex noise entry has
/// independent real/imag parts of variance sigma2 / 2.
CplxVector apply_channel(const CplxMatrix& h, const CplxVector& x, double sigma2,
                         RngStream& rng);

enum class GridAxis { freq, time };

/// Mean over valid cell pairs `step` apart of
/// |<H_a, H_b>_F| / (|H_a|_F |H_b|_F). Step 0 gives exactly 1.
double grid_correlation(const ChannelGrid& grid, GridAxis axis, std::uint32_t step);

/// Binary dataset i/o, format MCHAN1 (little-endian):
/// magic "MCHAN1", u16 version = 1, u32 N_r, u32 N_t, u32 F, u32 T,
/// then F*T*N_r*N_t entries as (f64 re, f64 im); cells ordered t-major
/// then f, entries row-major. Round-trips are bit-exact.
void save_grid(const ChannelGrid& grid, const std::string& path);
ChannelGrid load_grid(const std::string& path);

} // namespace mimo
