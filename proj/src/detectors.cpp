#include "mimo/detectors.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "mimo/denoiser.hpp"
#include "mimo/models.hpp"

namespace mimo {

void DetectorProblem::validate() const {
    if (y.size() != h.rows()) throw ContractError("DetectorProblem: y length != H rows");
    if (h.rows() < 1 || h.cols() < 1) throw ContractError("DetectorProblem: empty channel");
    if (sigma2 < 0.0) throw ContractError("DetectorProblem: sigma2 must be >= 0");
}

DetectionResult finalize_detection(const DetectorProblem& p, const Constellation& c,
                                   const CplxVector& soft) {
    DetectionResult r;
    r.soft = soft;
    r.symbols = hard_decision(soft, c);
    r.residual_norm2 = (p.y - p.h * to_points(r.symbols, c)).squaredNorm();
    return r;
}

DetectionResult zf_detect(const DetectorProblem& p, const Constellation& c) {
    p.validate();
    return finalize_detection(p, c, pseudo_inverse(p.h) * p.y);
}

DetectionResult matched_filter_detect(const DetectorProblem& p, const Constellation& c) {
    p.validate();
    return finalize_detection(p, c, p.h.adjoint() * p.y);
}

DetectionResult mmse_detect(const DetectorProblem& p, const Constellation& c) {
    p.validate();
    Eigen::MatrixXcd reg = p.h.adjoint() * p.h;
    reg.diagonal().array() += p.sigma2;
    Eigen::LLT<Eigen::MatrixXcd> llt(reg);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("mmse_detect: singular regularized Gram matrix", 0.0);
    }
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal().real();
    if (diag.minCoeff() <= 1e-12 * diag.maxCoeff()) {
        throw SingularityError("mmse_detect: near-singular regularized Gram matrix",
                               diag.minCoeff());
    }
    const CplxVector soft = llt.solve(CplxVector(p.h.adjoint() * p.y));
    return finalize_detection(p, c, soft);
}

DetectionResult vblast_detect(const DetectorProblem& p, const Constellation& c) {
    p.validate();
    const Eigen::Index n_t = p.h.cols();
    std::vector<Eigen::Index> remaining(static_cast<std::size_t>(n_t));
    for (Eigen::Index i = 0; i < n_t; ++i) remaining[std::size_t(i)] = i;

    CplxVector y_cur = p.y;
    CplxMatrix h_cur = p.h;
    CplxVector soft(n_t);
    SymbolVector symbols;
    symbols.indices.resize(std::size_t(n_t));

    while (!remaining.empty()) {
        const CplxMatrix pinv = pseudo_inverse(h_cur);
        // Max post-detection SNR = min pseudo-inverse row norm.
        Eigen::Index best = 0;
        double best_norm = pinv.row(0).squaredNorm();
        for (Eigen::Index i = 1; i < pinv.rows(); ++i) {
            const double n = pinv.row(i).squaredNorm();
            if (n < best_norm) {
                best_norm = n;
                best = i;
            }
        }
        const Eigen::Index orig = remaining[std::size_t(best)];
        const CplxScalar est = (pinv.row(best) * y_cur).value();
        soft(orig) = est;
        const std::uint32_t sym = c.nearest(est);
        symbols.indices[std::size_t(orig)] = sym;
        y_cur -= h_cur.col(best) * c.point(sym);

        remaining.erase(remaining.begin() + best);
        CplxMatrix next(h_cur.rows(), h_cur.cols() - 1);
        Eigen::Index out = 0;
        for (Eigen::Index j = 0; j < h_cur.cols(); ++j) {
            if (j != best) next.col(out++) = h_cur.col(j);
        }
        h_cur = std::move(next);
    }

    DetectionResult r;
    r.soft = std::move(soft);
    r.symbols = std::move(symbols);
    r.residual_norm2 = (p.y - p.h * to_points(r.symbols, c)).squaredNorm();
    return r;
}

DetectionResult amp_detect(const DetectorProblem& p, const Constellation& c,
                           std::uint32_t iters, IterationTrace* trace) {
    p.validate();
    const Eigen::Index n_t = p.h.cols();
    const double n_r = double(p.h.rows());
    const double ratio = double(n_t) / n_r;
    const double guard = 1e3 * std::sqrt(double(n_t));

    CplxVector x_hat = CplxVector::Zero(n_t);
    CplxVector onsager = CplxVector::Zero(n_t);
    if (trace) trace->clear();

    for (std::uint32_t t = 0; t < iters; ++t) {
        const CplxVector residual = p.y - p.h * x_hat;
        const CplxVector hr = p.h.adjoint() * residual;
        const CplxVector z = x_hat + hr + onsager;
        const double sigma_t2 = std::max(residual.squaredNorm() / n_r, kSigma2Floor);
        if (trace) trace->push_back({residual.norm(), sigma_t2});

        double deriv_sum = 0.0;
        for (Eigen::Index i = 0; i < n_t; ++i) {
            const DenoiseInput in{z(i), sigma_t2};
            x_hat(i) = gaussian_denoise(in, c);
            const DenoiseGrad g = gaussian_denoise_grad(in, c);
            deriv_sum += 0.5 * (g.d_re_re + g.d_im_im);
        }
        if (!x_hat.allFinite() || x_hat.norm() > guard) {
            throw DivergenceError("amp_detect: estimate diverged at iteration " +
                                  std::to_string(t));
        }
        onsager = ratio * (deriv_sum / double(n_t)) * (hr + onsager);
    }
    return finalize_detection(p, c, x_hat);
}

DetectionResult oamp_detect(const DetectorProblem& p, const Constellation& c,
                            std::uint32_t iters, IterationTrace* trace) {
    p.validate();
    if (!(p.sigma2 > 0.0)) throw ContractError("oamp_detect: sigma2 must be > 0");
    const ForwardTrace fwd = oamp_reference_forward(p, c, iters);
    if (trace) {
        trace->clear();
        for (const auto& layer : fwd.layers) {
            trace->push_back({layer.residual.norm(), layer.sigma2(0)});
        }
    }
    return finalize_detection(p, c, fwd.estimate());
}

DetectionResult ml_bruteforce(const DetectorProblem& p, const Constellation& c,
                              std::uint64_t budget) {
    p.validate();
    const Eigen::Index n_t = p.h.cols();
    std::uint64_t candidates = 1;
    for (Eigen::Index i = 0; i < n_t; ++i) {
        if (candidates > budget / c.order()) {
            throw CapacityError("ml_bruteforce: M^{N_t} exceeds budget (M = " +
                                std::to_string(c.order()) + ", N_t = " + std::to_string(n_t) +
                                ")");
        }
        candidates *= c.order();
    }

    // Depth-first over transmitters with incremental partial residuals;
    // lexicographic enumeration + strict improvement = documented tie rule.
    std::vector<CplxVector> partial(std::size_t(n_t) + 1);
    partial[0] = p.y;
    std::vector<std::uint32_t> current(std::size_t(n_t), 0);
    std::vector<std::uint32_t> best_idx(std::size_t(n_t), 0);
    double best_norm2 = std::numeric_limits<double>::infinity();

    const auto order = c.order();
    std::size_t depth = 0;
    // Iterative DFS over the full tree.
    while (true) {
        if (depth == std::size_t(n_t)) {
            const double norm2 = partial[depth].squaredNorm();
            if (norm2 < best_norm2) {
                best_norm2 = norm2;
                best_idx = current;
            }
            // Backtrack to the deepest level with an unvisited candidate.
            bool done = false;
            for (;;) {
                if (depth == 0) {
                    done = true;
                    break;
                }
                --depth;
                if (++current[depth] < order) break;
                current[depth] = 0;
            }
            if (done) break;
            continue; // re-expand from the advanced level
        }
        partial[depth + 1] =
            partial[depth] - p.h.col(Eigen::Index(depth)) * c.point(current[depth]);
        ++depth;
    }

    DetectionResult r;
    r.symbols.indices = best_idx;
    r.soft = to_points(r.symbols, c);
    r.residual_norm2 = best_norm2;
    return r;
}

} // namespace mimo
