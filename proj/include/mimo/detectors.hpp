#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/numerics.hpp"

namespace mimo {

/// One detection instance: received vector, channel and noise variance.
struct DetectorProblem {
    CplxVector y;      // N_r
    CplxMatrix h;      // N_r x N_t
    double sigma2 = 0.0;

    void validate() const;
};

struct DetectionResult {
    SymbolVector symbols;
    CplxVector soft;          // pre-decision estimate
    double residual_norm2 = 0.0; // |y - H point(symbols)|^2
};

/// Per-iteration record for the iterative detectors.
struct IterationStats {
    double residual_norm = 0.0;   // |y - H x_t| entering the iteration
    double denoiser_sigma2 = 0.0; // variance handed to the denoiser
};

using IterationTrace = std::vector<IterationStats>;

DetectionResult zf_detect(const DetectorProblem& p, const Constellation& c);
DetectionResult matched_filter_detect(const DetectorProblem& p, const Constellation& c);
DetectionResult mmse_detect(const DetectorProblem& p, const Constellation& c);

/// Ordered successive interference cancellation: at each stage the
/// remaining transmitter whose pseudo-inverse row has minimum norm (the
/// highest post-detection SNR) is decided, its contribution subtracted
/// and its column removed.
DetectionResult vblast_detect(const DetectorProblem& p, const Constellation& c);

/// Approximate message passing with the Onsager correction and the
/// empirical scalar schedule sigma_t^2 = max(|y - H x_t|^2 / N_r, 1e-12),
/// alpha_t = (N_t/N_r) x mean denoiser derivative of the previous
/// iteration. Throws DivergenceError if |x_t| exceeds 1e3 sqrt(N_t).
DetectionResult amp_detect(const DetectorProblem& p, const Constellation& c,
                           std::uint32_t iters = 50, IterationTrace* trace = nullptr);

/// Orthogonal AMP: decorrelated linear stage with per-iteration matrix
/// inverse (computed in the eigenbasis of H H^H) and trace normalization.
DetectionResult oamp_detect(const DetectorProblem& p, const Constellation& c,
                            std::uint32_t iters = 10, IterationTrace* trace = nullptr);

/// Exhaustive maximum-likelihood search over all M^{N_t} candidates.
/// Ties break toward the lexicographically smallest index vector.
DetectionResult ml_bruteforce(const DetectorProblem& p, const Constellation& c,
                              std::uint64_t budget = 1u << 20);

/// Finalize a soft estimate into a DetectionResult (hard decision plus
/// exact residual).
DetectionResult finalize_detection(const DetectorProblem& p, const Constellation& c,
                                   const CplxVector& soft);

} // namespace mimo
