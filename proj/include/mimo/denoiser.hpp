#pragma once

#include "mimo/constellation.hpp"
#include "mimo/numerics.hpp"

namespace mimo {

/// Inputs to the element-wise posterior-mean denoiser: an observation z
/// assumed to be a constellation point plus complex Gaussian noise of
/// variance sigma2.
struct DenoiseInput {
    CplxScalar z;
    double sigma2; // must be > 0; callers floor it (see kSigma2Floor)
};

/// Variance floor callers apply before invoking the denoiser.
inline constexpr double kSigma2Floor = 1e-12;

/// Jacobian of the denoiser output w.r.t. its inputs.
/// d(i,j) entries are partials of (out_re, out_im) w.r.t. (z_re, z_im);
/// d_sigma2 collects the partials w.r.t. the input variance as a complex
/// pair (re part = d out_re / d sigma2, im part = d out_im / d sigma2).
struct DenoiseGrad {
    double d_re_re;
    double d_re_im;
    double d_im_re;
    double d_im_im;
    CplxScalar d_sigma2;
};

/// Posterior mean of a constellation point given z = x + CN(0, sigma2):
/// softmax-weighted average of the points with exponents -|z - x_i|^2 / sigma2.
/// Exponents are max-subtracted, so the computation is stable for
/// sigma2 in [1e-30, 1e6] and |z| up to 1e3. Square QAM separates into
/// two per-axis computations; gaussian_denoise_direct keeps the full
/// M-point sum as an independent reference.
CplxScalar gaussian_denoise(const DenoiseInput& in, const Constellation& c);
CplxScalar gaussian_denoise_direct(const DenoiseInput& in, const Constellation& c);

/// Exact derivatives of gaussian_denoise. Same stability envelope.
DenoiseGrad gaussian_denoise_grad(const DenoiseInput& in, const Constellation& c);

/// One real axis of the separable computation: posterior mean, variance
/// and point/distance covariance for a PAM alphabet. Shared by the
/// forward value and the Jacobian so both see identical softmax weights.
struct PamMoments {
    double mean;        // E[a]
    double var;         // E[a^2] - E[a]^2
    double cov_dist;    // Cov(a, (v - a)^2)
    double mean_dist;   // E[(v - a)^2]
};
PamMoments pam_moments(double v, double sigma2, const std::vector<double>& levels);

} // namespace mimo
