#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/detectors.hpp"
#include "mimo/numerics.hpp"

namespace mimo {

enum class ModelKind : std::uint8_t { mmnet_iid = 0, mmnet = 1, oampnet = 2 };

const char* model_kind_name(ModelKind kind) noexcept;

/// Two scalars per layer: a step size on the matched-filter direction and
/// a multiplicative scale on the estimated denoiser input variance.
struct IidParams {
    std::vector<double> step_sizes;   // per layer
    std::vector<double> noise_scales; // per layer

    std::uint32_t layers() const noexcept { return std::uint32_t(step_sizes.size()); }
};

/// Per-layer trainable linear operator (N_t x N_r complex) plus a
/// per-transmitter noise scale vector.
struct FullParams {
    std::vector<CplxMatrix> linear_ops;   // per layer, N_t x N_r
    std::vector<RealVector> noise_scales; // per layer, length N_t

    std::uint32_t layers() const noexcept { return std::uint32_t(linear_ops.size()); }
    std::uint32_t n_t() const { return std::uint32_t(linear_ops.at(0).rows()); }
    std::uint32_t n_r() const { return std::uint32_t(linear_ops.at(0).cols()); }
};

/// Two scalars per layer on top of the OAMP linear stage.
struct OampNetParams {
    std::vector<double> step_sizes;
    std::vector<double> noise_scales;

    std::uint32_t layers() const noexcept { return std::uint32_t(step_sizes.size()); }
};

using ModelParams = std::variant<IidParams, FullParams, OampNetParams>;

ModelKind params_kind(const ModelParams& p) noexcept;

/// Intermediate quantities of an unrolled forward pass, one entry per layer.
struct ForwardTrace {
    struct Layer {
        CplxVector residual;    // y - H x_t entering the layer
        CplxVector z;           // linear stage output
        RealVector sigma2;      // denoiser input variance per transmitter
        CplxVector x_next;      // denoiser output
    };
    std::vector<Layer> layers;

    const CplxVector& estimate() const { return layers.back().x_next; }
};

/// Denoiser input variance estimate shared by every learned model:
///   sigma_t^2[i] = (theta2[i]/N_t) (
///        |I - A H|_F^2 / |H|_F^2 * max(residual_norm2 - N_r sigma2, 0)
///      + |A|_F^2     / |H|_F^2 * sigma2 )
/// A scalar theta2 broadcasts over transmitters.
RealVector noise_var_estimate(const CplxMatrix& a_t, const CplxMatrix& h,
                              double residual_norm2, double sigma2,
                              const RealVector& theta2);
RealVector noise_var_estimate(const CplxMatrix& a_t, const CplxMatrix& h,
                              double residual_norm2, double sigma2, double theta2);

ForwardTrace mmnet_iid_forward(const DetectorProblem& p, const Constellation& c,
                               const IidParams& params);
ForwardTrace mmnet_forward(const DetectorProblem& p, const Constellation& c,
                           const FullParams& params);
ForwardTrace oampnet_forward(const DetectorProblem& p, const Constellation& c,
                             const OampNetParams& params);

ForwardTrace model_forward(const DetectorProblem& p, const Constellation& c,
                           const ModelParams& params);

/// OAMP trajectory through the same layer routine as oampnet_forward,
/// with the per-layer trace normalization gamma_t in place of a trained
/// step size and unit noise scale. Records the gammas if requested.
ForwardTrace oamp_reference_forward(const DetectorProblem& p, const Constellation& c,
                                    std::uint32_t iters,
                                    std::vector<double>* gammas_out = nullptr);

/// Matched-filter warm start: every layer gets H^H scaled by
/// N_t / trace(H^H H); noise scales start at one.
FullParams init_full_params(const CplxMatrix& h, std::uint32_t layers);

/// Unit step sizes and noise scales.
IidParams init_iid_params(std::uint32_t layers);
OampNetParams init_oampnet_params(std::uint32_t layers);

/// Channel-independent factorization used by the OAMP family: with
/// H H^H = U diag(lambda) U^H, the per-sample matrix inverse
/// (v^2 H H^H + sigma^2 I)^{-1} becomes a diagonal rescale in the rotated
/// receive basis.
struct OampChannelOps {
    CplxMatrix u;        // eigenvectors of H H^H
    RealVector lambda;   // eigenvalues, >= 0
    CplxMatrix v;        // U^H H
    RealVector row_sq;   // m_i = |row i of V|^2 = diag(V V^H)
    RealMatrix cross_sq; // |(V V^H)_ij|^2
    double h_fro2 = 0.0; // |H|_F^2 == trace(H^H H)
};
OampChannelOps make_oamp_ops(const CplxMatrix& h);

/// Floor applied to the empirical OAMP signal-error variance v_t^2.
inline constexpr double kOampVarFloor = 1e-9;

/// Parameter (de)serialization, format MPARM1 (little-endian):
/// magic "MPARM1", u16 version = 1, u8 kind, u32 T, u32 N_t, u32 N_r
/// (zero for scalar-parameter kinds), then f64 values in declaration
/// order (all step sizes / linear operators first, then noise scales;
/// complex entries row-major as re, im pairs).
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

/// Flat real-coordinate view used by the optimizer and the serializer.
/// Order matches the MPARM1 value section.
std::vector<double> flatten_params(const ModelParams& params);
void unflatten_params(ModelParams& params, const std::vector<double>& flat);
std::size_t param_count(const ModelParams& params);

} // namespace mimo
