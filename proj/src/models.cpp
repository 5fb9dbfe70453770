#include "mimo/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "mimo/denoiser.hpp"

namespace mimo {

const char* model_kind_name(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::mmnet_iid: return "mmnet-iid";
        case ModelKind::mmnet: return "mmnet";
        case ModelKind::oampnet: return "oampnet";
    }
    return "?";
}

ModelKind params_kind(const ModelParams& p) noexcept {
    if (std::holds_alternative<IidParams>(p)) return ModelKind::mmnet_iid;
    if (std::holds_alternative<FullParams>(p)) return ModelKind::mmnet;
    return ModelKind::oampnet;
}

RealVector noise_var_estimate(const CplxMatrix& a_t, const CplxMatrix& h,
                              double residual_norm2, double sigma2,
                              const RealVector& theta2) {
    if (a_t.rows() != h.cols() || a_t.cols() != h.rows()) {
        throw ContractError("noise_var_estimate: A must be N_t x N_r");
    }
    if (sigma2 < 0.0) throw ContractError("noise_var_estimate: sigma2 must be >= 0");
    const double h_fro2 = h.squaredNorm();
    if (!(h_fro2 > 0.0)) throw ContractError("noise_var_estimate: zero channel");
    const Eigen::Index n_t = h.cols();
    if (theta2.size() != n_t) throw ContractError("noise_var_estimate: theta2 length != N_t");

    CplxMatrix ah = a_t * h;
    ah.diagonal().array() -= 1.0; // A H - I, same Frobenius norm as I - A H
    const double mismatch = ah.squaredNorm() / h_fro2;
    const double gain = a_t.squaredNorm() / h_fro2;
    const double hinge = std::max(residual_norm2 - double(h.rows()) * sigma2, 0.0);
    return (theta2 / double(n_t)) * (mismatch * hinge + gain * sigma2);
}

RealVector noise_var_estimate(const CplxMatrix& a_t, const CplxMatrix& h,
                              double residual_norm2, double sigma2, double theta2) {
    return noise_var_estimate(a_t, h, residual_norm2, sigma2,
                              RealVector::Constant(h.cols(), theta2));
}

namespace {

// Shared denoiser application with per-transmitter variances (floored).
CplxVector denoise_vector(const CplxVector& z, const RealVector& sigma2,
                          const Constellation& c) {
    CplxVector out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        out(i) = gaussian_denoise({z(i), std::max(sigma2(i), kSigma2Floor)}, c);
    }
    return out;
}

// sigma_t^2 from precomputed Frobenius ratios: the per-layer constants of
// the estimator once A_t is fixed.
RealVector sigma2_from_ratios(const RealVector& theta2, Eigen::Index n_t, double mismatch,
                              double gain, double residual_norm2, double n_r_sigma2,
                              double sigma2) {
    const double hinge = std::max(residual_norm2 - n_r_sigma2, 0.0);
    return (theta2 / double(n_t)) * (mismatch * hinge + gain * sigma2);
}

} // namespace

ForwardTrace mmnet_iid_forward(const DetectorProblem& p, const Constellation& c,
                               const IidParams& params) {
    p.validate();
    if (params.layers() < 1) throw ContractError("mmnet_iid_forward: need >= 1 layer");
    const Eigen::Index n_t = p.h.cols();
    const double h_fro2 = p.h.squaredNorm();
    const CplxMatrix gram = p.h.adjoint() * p.h;
    const double gram_fro2 = gram.squaredNorm();
    const double tr_gram = gram.trace().real(); // == |H|_F^2
    const double n_r_sigma2 = double(p.h.rows()) * p.sigma2;

    ForwardTrace trace;
    trace.layers.resize(params.layers());
    CplxVector x_hat = CplxVector::Zero(n_t);
    for (std::uint32_t t = 0; t < params.layers(); ++t) {
        auto& layer = trace.layers[t];
        const double theta1 = params.step_sizes[t];
        layer.residual = p.y - p.h * x_hat;
        layer.z = x_hat + theta1 * (p.h.adjoint() * layer.residual);
        // |I - theta1 G|_F^2 expands to N_t - 2 theta1 tr G + theta1^2 |G|_F^2;
        // |theta1 H^H|_F^2 = theta1^2 |H|_F^2.
        const double mismatch =
            (double(n_t) - 2.0 * theta1 * tr_gram + theta1 * theta1 * gram_fro2) / h_fro2;
        const double gain = theta1 * theta1;
        layer.sigma2 = sigma2_from_ratios(RealVector::Constant(n_t, params.noise_scales[t]),
                                          n_t, mismatch, gain, layer.residual.squaredNorm(),
                                          n_r_sigma2, p.sigma2);
        layer.x_next = denoise_vector(layer.z, layer.sigma2, c);
        x_hat = layer.x_next;
    }
    return trace;
}

ForwardTrace mmnet_forward(const DetectorProblem& p, const Constellation& c,
                           const FullParams& params) {
    p.validate();
    if (params.layers() < 1) throw ContractError("mmnet_forward: need >= 1 layer");
    const Eigen::Index n_t = p.h.cols();
    if (params.linear_ops[0].rows() != n_t || params.linear_ops[0].cols() != p.h.rows()) {
        throw ContractError("mmnet_forward: linear op dimensions do not match the channel");
    }
    const double h_fro2 = p.h.squaredNorm();
    const double n_r_sigma2 = double(p.h.rows()) * p.sigma2;

    ForwardTrace trace;
    trace.layers.resize(params.layers());
    CplxVector x_hat = CplxVector::Zero(n_t);
    for (std::uint32_t t = 0; t < params.layers(); ++t) {
        auto& layer = trace.layers[t];
        const CplxMatrix& a = params.linear_ops[t];
        layer.residual = p.y - p.h * x_hat;
        layer.z = x_hat + a * layer.residual;
        CplxMatrix ah = a * p.h;
        ah.diagonal().array() -= 1.0;
        const double mismatch = ah.squaredNorm() / h_fro2;
        const double gain = a.squaredNorm() / h_fro2;
        layer.sigma2 = sigma2_from_ratios(params.noise_scales[t], n_t, mismatch, gain,
                                          layer.residual.squaredNorm(), n_r_sigma2, p.sigma2);
        layer.x_next = denoise_vector(layer.z, layer.sigma2, c);
        x_hat = layer.x_next;
    }
    return trace;
}

OampChannelOps make_oamp_ops(const CplxMatrix& h) {
    OampChannelOps ops;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h * h.adjoint());
    ops.u = eig.eigenvectors();
    ops.lambda = eig.eigenvalues().cwiseMax(0.0);
    ops.v = ops.u.adjoint() * h;
    const Eigen::Index n_r = h.rows();
    ops.row_sq.resize(n_r);
    for (Eigen::Index i = 0; i < n_r; ++i) ops.row_sq(i) = ops.v.row(i).squaredNorm();
    const CplxMatrix s = ops.v * ops.v.adjoint();
    ops.cross_sq = s.cwiseAbs2();
    ops.h_fro2 = h.squaredNorm();
    return ops;
}

namespace {

// One OAMP-family layer in the rotated receive basis. step_size is the
// trained (or gamma-normalized) multiplier applied to the decorrelating
// direction H^H (v^2 H H^H + sigma^2 I)^{-1} r.
struct OampLayerOut {
    double v2 = 0.0;
    double gamma = 0.0; // trace-normalizing step size
    RealVector w;       // 1 / (v^2 lambda_i + sigma^2)
};

OampLayerOut oamp_layer_geometry(const OampChannelOps& ops, double residual_norm2,
                                 double sigma2, double n_r_sigma2) {
    OampLayerOut out;
    out.v2 = std::max((residual_norm2 - n_r_sigma2) / ops.h_fro2, kOampVarFloor);
    out.w = (out.v2 * ops.lambda.array() + sigma2).inverse();
    const double tr = out.v2 * out.w.dot(ops.row_sq);
    out.gamma = double(ops.v.cols()) / tr;
    return out;
}

} // namespace

ForwardTrace oampnet_forward_impl(const DetectorProblem& p, const Constellation& c,
                                  std::uint32_t layers, const double* step_sizes,
                                  const double* noise_scales, bool use_gamma,
                                  std::vector<double>* gammas_out) {
    p.validate();
    if (!(p.sigma2 > 0.0)) throw ContractError("oampnet_forward: sigma2 must be > 0");
    if (layers < 1) throw ContractError("oampnet_forward: need >= 1 layer");
    const OampChannelOps ops = make_oamp_ops(p.h);
    const Eigen::Index n_t = p.h.cols();
    const double n_r_sigma2 = double(p.h.rows()) * p.sigma2;
    const CplxVector y_rot = ops.u.adjoint() * p.y;

    ForwardTrace trace;
    trace.layers.resize(layers);
    if (gammas_out) gammas_out->assign(layers, 0.0);
    CplxVector x_hat = CplxVector::Zero(n_t);
    for (std::uint32_t t = 0; t < layers; ++t) {
        auto& layer = trace.layers[t];
        const CplxVector r_rot = y_rot - ops.v * x_hat;
        const double res2 = r_rot.squaredNorm();
        const OampLayerOut geo = oamp_layer_geometry(ops, res2, p.sigma2, n_r_sigma2);
        const double theta1 = use_gamma ? geo.gamma : step_sizes[t];
        if (gammas_out) (*gammas_out)[t] = geo.gamma;

        layer.residual = ops.u * r_rot; // back in the receive basis: y - H x_t
        layer.z = x_hat + theta1 * (ops.v.adjoint() * geo.w.cwiseProduct(r_rot).eval());
        // Frobenius ratios of A = theta1 H^H K^{-1} in the eigenbasis.
        const double wm = geo.w.dot(ops.row_sq);
        const double wqw = geo.w.dot(ops.cross_sq * geo.w);
        const double mismatch =
            (double(n_t) - 2.0 * theta1 * wm + theta1 * theta1 * wqw) / ops.h_fro2;
        const double gain =
            theta1 * theta1 * geo.w.cwiseAbs2().dot(ops.row_sq) / ops.h_fro2;
        const double theta2 = use_gamma ? 1.0 : noise_scales[t];
        layer.sigma2 = sigma2_from_ratios(RealVector::Constant(n_t, theta2), n_t, mismatch,
                                          gain, res2, n_r_sigma2, p.sigma2);
        layer.x_next = denoise_vector(layer.z, layer.sigma2, c);
        x_hat = layer.x_next;
    }
    return trace;
}

ForwardTrace oampnet_forward(const DetectorProblem& p, const Constellation& c,
                             const OampNetParams& params) {
    return oampnet_forward_impl(p, c, params.layers(), params.step_sizes.data(),
                                params.noise_scales.data(), false, nullptr);
}

ForwardTrace oamp_reference_forward(const DetectorProblem& p, const Constellation& c,
                                    std::uint32_t iters, std::vector<double>* gammas_out) {
    return oampnet_forward_impl(p, c, iters, nullptr, nullptr, true, gammas_out);
}

ForwardTrace model_forward(const DetectorProblem& p, const Constellation& c,
                           const ModelParams& params) {
    switch (params_kind(params)) {
        case ModelKind::mmnet_iid: return mmnet_iid_forward(p, c, std::get<IidParams>(params));
        case ModelKind::mmnet: return mmnet_forward(p, c, std::get<FullParams>(params));
        case ModelKind::oampnet: return oampnet_forward(p, c, std::get<OampNetParams>(params));
    }
    throw ContractError("model_forward: unknown kind");
}

FullParams init_full_params(const CplxMatrix& h, std::uint32_t layers) {
    if (layers < 1) throw ContractError("init_full_params: need >= 1 layer");
    const double tr_gram = h.squaredNorm();
    if (!(tr_gram > 0.0)) throw ContractError("init_full_params: zero channel");
    FullParams params;
    const CplxMatrix warm = (double(h.cols()) / tr_gram) * h.adjoint();
    params.linear_ops.assign(layers, warm);
    params.noise_scales.assign(layers, RealVector::Ones(h.cols()));
    return params;
}

IidParams init_iid_params(std::uint32_t layers) {
    if (layers < 1) throw ContractError("init_iid_params: need >= 1 layer");
    return {std::vector<double>(layers, 1.0), std::vector<double>(layers, 1.0)};
}

OampNetParams init_oampnet_params(std::uint32_t layers) {
    if (layers < 1) throw ContractError("init_oampnet_params: need >= 1 layer");
    return {std::vector<double>(layers, 1.0), std::vector<double>(layers, 1.0)};
}

// ---------------------------------------------------------------------------
// Flattening and MPARM1 serialization
// ---------------------------------------------------------------------------

std::size_t param_count(const ModelParams& params) {
    if (const auto* iid = std::get_if<IidParams>(&params)) return 2 * iid->layers();
    if (const auto* oamp = std::get_if<OampNetParams>(&params)) return 2 * oamp->layers();
    const auto& full = std::get<FullParams>(params);
    return full.layers() * (2 * std::size_t(full.n_t()) * full.n_r() + full.n_t());
}

std::vector<double> flatten_params(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(param_count(params));
    if (const auto* iid = std::get_if<IidParams>(&params)) {
        flat.insert(flat.end(), iid->step_sizes.begin(), iid->step_sizes.end());
        flat.insert(flat.end(), iid->noise_scales.begin(), iid->noise_scales.end());
    } else if (const auto* oamp = std::get_if<OampNetParams>(&params)) {
        flat.insert(flat.end(), oamp->step_sizes.begin(), oamp->step_sizes.end());
        flat.insert(flat.end(), oamp->noise_scales.begin(), oamp->noise_scales.end());
    } else {
        const auto& full = std::get<FullParams>(params);
        for (const CplxMatrix& a : full.linear_ops) {
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                for (Eigen::Index j = 0; j < a.cols(); ++j) {
                    flat.push_back(a(i, j).real());
                    flat.push_back(a(i, j).imag());
                }
            }
        }
        for (const RealVector& s : full.noise_scales) {
            flat.insert(flat.end(), s.data(), s.data() + s.size());
        }
    }
    return flat;
}

void unflatten_params(ModelParams& params, const std::vector<double>& flat) {
    if (flat.size() != param_count(params)) {
        throw ContractError("unflatten_params: size mismatch");
    }
    std::size_t pos = 0;
    auto scalars = [&](std::vector<double>& step, std::vector<double>& noise) {
        for (double& v : step) v = flat[pos++];
        for (double& v : noise) v = flat[pos++];
    };
    if (auto* iid = std::get_if<IidParams>(&params)) {
        scalars(iid->step_sizes, iid->noise_scales);
    } else if (auto* oamp = std::get_if<OampNetParams>(&params)) {
        scalars(oamp->step_sizes, oamp->noise_scales);
    } else {
        auto& full = std::get<FullParams>(params);
        for (CplxMatrix& a : full.linear_ops) {
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                for (Eigen::Index j = 0; j < a.cols(); ++j) {
                    const double re = flat[pos++];
                    const double im = flat[pos++];
                    a(i, j) = CplxScalar(re, im);
                }
            }
        }
        for (RealVector& s : full.noise_scales) {
            for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = flat[pos++];
        }
    }
}

namespace {

constexpr char kParamMagic[6] = {'M', 'P', 'A', 'R', 'M', '1'};
constexpr std::uint16_t kParamVersion = 1;

void put_bytes(std::string& out, const void* data, std::size_t n) {
    out.append(static_cast<const char*>(data), n);
}

void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
}

void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64le(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xFF));
}

} // namespace

void save_params(const ModelParams& params, const std::string& path) {
    const ModelKind kind = params_kind(params);
    std::uint32_t layers = 0, n_t = 0, n_r = 0;
    if (const auto* iid = std::get_if<IidParams>(&params)) {
        layers = iid->layers();
    } else if (const auto* oamp = std::get_if<OampNetParams>(&params)) {
        layers = oamp->layers();
    } else {
        const auto& full = std::get<FullParams>(params);
        layers = full.layers();
        n_t = full.n_t();
        n_r = full.n_r();
    }
    std::string out;
    put_bytes(out, kParamMagic, 6);
    put_u16le(out, kParamVersion);
    out.push_back(char(std::uint8_t(kind)));
    put_u32le(out, layers);
    put_u32le(out, n_t);
    put_u32le(out, n_r);
    for (double v : flatten_params(params)) put_f64le(out, v);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("save_params: cannot open " + path + " for writing");
    file.write(out.data(), std::streamsize(out.size()));
    if (!file) throw Error("save_params: write failed for " + path);
}

ModelParams load_params(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error("load_params: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    auto need = [&](std::size_t pos, std::size_t n, const char* what) {
        if (pos + n > bytes.size()) {
            throw FormatError(std::string("MPARM1: truncated while reading ") + what, pos);
        }
    };
    need(0, 6, "magic");
    if (std::memcmp(bytes.data(), kParamMagic, 6) != 0) throw FormatError("MPARM1: bad magic", 0);
    need(6, 2, "version");
    const std::uint16_t version = std::uint16_t(std::uint8_t(bytes[6])) |
                                  std::uint16_t(std::uint8_t(bytes[7])) << 8;
    if (version != kParamVersion) {
        throw FormatError("MPARM1: unsupported version " + std::to_string(version), 6);
    }
    need(8, 1, "kind");
    const auto kind_raw = std::uint8_t(bytes[8]);
    if (kind_raw > 2) throw FormatError("MPARM1: unknown model kind", 8);
    auto read_u32 = [&](std::size_t pos) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(bytes[pos + i])) << (8 * i);
        return v;
    };
    need(9, 12, "dimensions");
    const std::uint32_t layers = read_u32(9);
    const std::uint32_t n_t = read_u32(13);
    const std::uint32_t n_r = read_u32(17);
    if (layers < 1) throw FormatError("MPARM1: zero layers", 9);

    ModelParams params;
    const auto kind = ModelKind(kind_raw);
    if (kind == ModelKind::mmnet_iid) {
        params = IidParams{std::vector<double>(layers), std::vector<double>(layers)};
    } else if (kind == ModelKind::oampnet) {
        params = OampNetParams{std::vector<double>(layers), std::vector<double>(layers)};
    } else {
        if (n_t < 1 || n_r < 1) throw FormatError("MPARM1: missing dimensions", 13);
        FullParams full;
        full.linear_ops.assign(layers, CplxMatrix::Zero(n_t, n_r));
        full.noise_scales.assign(layers, RealVector::Zero(n_t));
        params = std::move(full);
    }

    const std::size_t count = param_count(params);
    std::vector<double> flat(count);
    std::size_t pos = 21;
    for (std::size_t i = 0; i < count; ++i) {
        need(pos, 8, "values");
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= std::uint64_t(std::uint8_t(bytes[pos + b])) << (8 * b);
        flat[i] = std::bit_cast<double>(v);
        pos += 8;
    }
    if (pos != bytes.size()) throw FormatError("MPARM1: trailing bytes", pos);
    unflatten_params(params, flat);
    return params;
}

} // namespace mimo
