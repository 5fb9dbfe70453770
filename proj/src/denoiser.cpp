#include "mimo/denoiser.hpp"

#include <cmath>
#include <limits>

namespace mimo {

namespace {

void require_valid(const DenoiseInput& in) {
    if (!(in.sigma2 > 0.0)) {
        throw ContractError("gaussian_denoise: sigma2 must be > 0 (got " +
                            std::to_string(in.sigma2) + ")");
    }
}

} // namespace

PamMoments pam_moments(double v, double sigma2, const std::vector<double>& levels) {
    const std::size_t k = levels.size();
    if (k == 0 || k > 8) throw ContractError("pam_moments: expected 1..8 levels");
    // Max-subtracted softmax over exponents -(v - a)^2 / sigma2.
    double emax = -std::numeric_limits<double>::infinity();
    double dists[8]; // k <= 8 for QAM64
    for (std::size_t i = 0; i < k; ++i) {
        const double d = (v - levels[i]) * (v - levels[i]);
        dists[i] = d;
        const double e = -d / sigma2;
        if (e > emax) emax = e;
    }
    double z = 0.0, s1 = 0.0, s2 = 0.0, sd = 0.0, sad = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = std::exp(-dists[i] / sigma2 - emax);
        z += w;
        s1 += w * levels[i];
        s2 += w * levels[i] * levels[i];
        sd += w * dists[i];
        sad += w * levels[i] * dists[i];
    }
    PamMoments m;
    m.mean = s1 / z;
    m.var = s2 / z - m.mean * m.mean;
    if (m.var < 0.0) m.var = 0.0;
    m.mean_dist = sd / z;
    m.cov_dist = sad / z - m.mean * m.mean_dist;
    return m;
}

CplxScalar gaussian_denoise(const DenoiseInput& in, const Constellation& c) {
    require_valid(in);
    const PamMoments mr = pam_moments(in.z.real(), in.sigma2, c.levels());
    const PamMoments mi = pam_moments(in.z.imag(), in.sigma2, c.levels());
    return {mr.mean, mi.mean};
}

CplxScalar gaussian_denoise_direct(const DenoiseInput& in, const Constellation& c) {
    require_valid(in);
    const auto& pts = c.points();
    double emax = -std::numeric_limits<double>::infinity();
    std::vector<double> dists(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        dists[i] = std::norm(in.z - pts[i]);
        const double e = -dists[i] / in.sigma2;
        if (e > emax) emax = e;
    }
    double z = 0.0;
    CplxScalar acc(0.0, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double w = std::exp(-dists[i] / in.sigma2 - emax);
        z += w;
        acc += w * pts[i];
    }
    return acc / z;
}

DenoiseGrad gaussian_denoise_grad(const DenoiseInput& in, const Constellation& c) {
    require_valid(in);
    const PamMoments mr = pam_moments(in.z.real(), in.sigma2, c.levels());
    const PamMoments mi = pam_moments(in.z.imag(), in.sigma2, c.levels());
    // Posterior factorizes per axis for square QAM, so the cross partials
    // vanish identically, d mean / d v = 2 Var / sigma2 and
    // d mean / d sigma2 = Cov(a, (v - a)^2) / sigma2^2.
    DenoiseGrad g;
    g.d_re_re = 2.0 * mr.var / in.sigma2;
    g.d_im_im = 2.0 * mi.var / in.sigma2;
    g.d_re_im = 0.0;
    g.d_im_re = 0.0;
    const double inv_s4 = 1.0 / (in.sigma2 * in.sigma2);
    g.d_sigma2 = {mr.cov_dist * inv_s4, mi.cov_dist * inv_s4};
    return g;
}

} // namespace mimo
