#include "mimo/trainer.hpp"

#include <cmath>
#include <functional>

#include "mimo/denoiser.hpp"
#include "mimo/parallel.hpp"

namespace mimo {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
    if (snr_db_lo > snr_db_hi) throw ContractError("TrainConfig: snr range is inverted");
    if (!(learning_rate > 0.0)) throw ContractError("TrainConfig: learning_rate must be > 0");
}

AdamState make_adam_state(std::size_t param_count, double lr) {
    AdamState s;
    s.m.assign(param_count, 0.0);
    s.v.assign(param_count, 0.0);
    s.lr = lr;
    return s;
}

void default_snr_range(std::uint32_t order, double& lo, double& hi) {
    switch (order) {
        case 4: lo = 4.0; hi = 9.0; return;
        case 16: lo = 11.0; hi = 16.0; return;
        case 64: lo = 18.0; hi = 23.0; return;
    }
    throw ContractError("default_snr_range: unsupported order");
}

TrainingBatch sample_training_batch(const CplxMatrix& h, const Constellation& c,
                                    std::uint32_t batch_size, double snr_db_lo,
                                    double snr_db_hi, RngStream& rng) {
    if (batch_size < 1) throw ContractError("sample_training_batch: batch_size must be >= 1");
    const Eigen::Index n_t = h.cols(), n_r = h.rows(), b = batch_size;
    TrainingBatch batch;
    batch.snr_db = rng.uniform_in(snr_db_lo, snr_db_hi);
    batch.sigma2 = sigma2_from_snr(h, batch.snr_db);
    batch.x_points.resize(n_t, b);
    for (Eigen::Index col = 0; col < b; ++col) {
        for (Eigen::Index i = 0; i < n_t; ++i) {
            batch.x_points(i, col) = c.point(rng.index_pow2(c.order()));
        }
    }
    batch.y = h * batch.x_points;
    const double sd = std::sqrt(batch.sigma2 / 2.0);
    for (Eigen::Index col = 0; col < b; ++col) {
        for (Eigen::Index i = 0; i < n_r; ++i) {
            batch.y(i, col) += CplxScalar(rng.gaussian() * sd, rng.gaussian() * sd);
        }
    }
    return batch;
}

double loss(const std::vector<ForwardTrace>& traces, const std::vector<SymbolVector>& truth,
            const Constellation& c) {
    if (traces.size() != truth.size() || traces.empty()) {
        throw ContractError("loss: batch shapes inconsistent");
    }
    double acc = 0.0;
    for (std::size_t b = 0; b < traces.size(); ++b) {
        const CplxVector x = to_points(truth[b], c);
        const auto& layers = traces[b].layers;
        if (layers.empty()) throw ContractError("loss: empty trace");
        double per = 0.0;
        for (const auto& layer : layers) per += (layer.x_next - x).squaredNorm();
        acc += per / double(layers.size());
    }
    return acc / double(traces.size());
}

// ---------------------------------------------------------------------------
// Batched unrolled engine (forward + exact reverse-mode backward)
// ---------------------------------------------------------------------------

namespace {

struct EngineCtx {
    const Constellation* constellation = nullptr;
    ModelKind kind{};
    const CplxMatrix* h = nullptr;
    double sigma2 = 0.0;
    double n_r_sigma2 = 0.0;
    double h_fro2 = 0.0;
    Eigen::Index n_t = 0, n_r = 0;
    // mmnet-iid:
    double tr_gram = 0.0, gram_fro2 = 0.0;
    CplxMatrix h_adj; // H^H
    // mmnet (full): per-layer A H - I and shared ratios
    std::vector<CplxMatrix> ah_minus_i;
    std::vector<double> mismatch, gain;
    // oampnet:
    OampChannelOps ops;
    CplxMatrix y_basis; // N_r x B: U^H y for oampnet, y otherwise
    CplxMatrix x_true;  // N_t x B
};

EngineCtx make_ctx(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                   const ModelParams& params) {
    EngineCtx ctx;
    ctx.constellation = &c;
    ctx.kind = params_kind(params);
    ctx.h = &h;
    ctx.sigma2 = batch.sigma2;
    ctx.n_r = h.rows();
    ctx.n_t = h.cols();
    ctx.n_r_sigma2 = double(ctx.n_r) * batch.sigma2;
    ctx.h_fro2 = h.squaredNorm();
    if (!(ctx.h_fro2 > 0.0)) throw ContractError("training: zero channel");
    ctx.x_true = batch.x_points;
    if (batch.y.rows() != ctx.n_r || batch.x_points.rows() != ctx.n_t ||
        batch.y.cols() != batch.x_points.cols()) {
        throw ContractError("training: batch shapes inconsistent with channel");
    }

    switch (ctx.kind) {
        case ModelKind::mmnet_iid: {
            const CplxMatrix gram = h.adjoint() * h;
            ctx.tr_gram = gram.trace().real();
            ctx.gram_fro2 = gram.squaredNorm();
            ctx.h_adj = h.adjoint();
            ctx.y_basis = batch.y;
            break;
        }
        case ModelKind::mmnet: {
            const auto& full = std::get<FullParams>(params);
            if (full.layers() < 1) throw ContractError("training: need >= 1 layer");
            if (full.n_t() != ctx.n_t || full.n_r() != ctx.n_r) {
                throw ContractError("training: parameter dimensions do not match the channel");
            }
            ctx.h_adj = h.adjoint();
            ctx.y_basis = batch.y;
            ctx.ah_minus_i.reserve(full.layers());
            for (const CplxMatrix& a : full.linear_ops) {
                CplxMatrix m = a * h;
                m.diagonal().array() -= 1.0;
                ctx.ah_minus_i.push_back(std::move(m));
                ctx.mismatch.push_back(ctx.ah_minus_i.back().squaredNorm() / ctx.h_fro2);
                ctx.gain.push_back(a.squaredNorm() / ctx.h_fro2);
            }
            break;
        }
        case ModelKind::oampnet: {
            if (!(batch.sigma2 > 0.0)) {
                throw ContractError("training: oampnet requires sigma2 > 0");
            }
            ctx.ops = make_oamp_ops(h);
            ctx.y_basis = ctx.ops.u.adjoint() * batch.y;
            break;
        }
    }
    return ctx;
}

// Per-layer tape over one column chunk.
struct LayerTape {
    CplxMatrix x_in;     // N_t x B
    CplxMatrix residual; // N_r x B (rotated basis for oampnet)
    RealVector res2;     // B
    CplxMatrix lin;      // N_t x B unscaled linear direction
    RealMatrix sigma2raw;
    RealMatrix var_re, var_im, cov_re, cov_im;
    CplxMatrix x_out;
    // oampnet extras
    RealVector v2, wm, wqw, w2m, c1, c2;
    RealMatrix w, qw;
};

struct ChunkResult {
    double loss_sum = 0.0;            // sum over layers/columns of |x_out - x|^2
    std::vector<double> grad;         // unnormalized d(loss_sum)/d(theta)
};

ChunkResult run_chunk(const EngineCtx& ctx, const ModelParams& params, Eigen::Index col0,
                      Eigen::Index ncols, bool want_grad) {
    const Constellation& c = *ctx.constellation;
    const Eigen::Index n_t = ctx.n_t, n_r = ctx.n_r;
    const auto* iid = std::get_if<IidParams>(&params);
    const auto* full = std::get_if<FullParams>(&params);
    const auto* oamp = std::get_if<OampNetParams>(&params);
    const std::uint32_t layers = iid ? iid->layers() : full ? full->layers() : oamp->layers();
    if (layers < 1) throw ContractError("training: need >= 1 layer");

    const CplxMatrix y = ctx.y_basis.middleCols(col0, ncols);
    const CplxMatrix x_true = ctx.x_true.middleCols(col0, ncols);

    std::vector<LayerTape> tape(layers);
    ChunkResult out;

    // ---- forward ----
    CplxMatrix x_hat = CplxMatrix::Zero(n_t, ncols);
    for (std::uint32_t t = 0; t < layers; ++t) {
        LayerTape& lt = tape[t];
        lt.x_in = x_hat;
        double mismatch_shared = 0.0, gain_shared = 0.0;
        double theta1 = 1.0;
        if (iid) {
            theta1 = iid->step_sizes[t];
            lt.residual = y - *ctx.h * x_hat;
            lt.lin = ctx.h_adj * lt.residual;
            mismatch_shared = (double(n_t) - 2.0 * theta1 * ctx.tr_gram +
                               theta1 * theta1 * ctx.gram_fro2) /
                              ctx.h_fro2;
            gain_shared = theta1 * theta1;
        } else if (full) {
            lt.residual = y - *ctx.h * x_hat;
            lt.lin = full->linear_ops[t] * lt.residual;
            mismatch_shared = ctx.mismatch[t];
            gain_shared = ctx.gain[t];
        } else {
            theta1 = oamp->step_sizes[t];
            lt.residual = y - ctx.ops.v * x_hat;
        }
        lt.res2 = lt.residual.colwise().squaredNorm().transpose();

        if (oamp) {
            lt.v2 = ((lt.res2.array() - ctx.n_r_sigma2) / ctx.h_fro2)
                        .max(kOampVarFloor)
                        .matrix();
            lt.w.resize(n_r, ncols);
            for (Eigen::Index b = 0; b < ncols; ++b) {
                lt.w.col(b) = (lt.v2(b) * ctx.ops.lambda.array() + ctx.sigma2).inverse();
            }
            lt.qw = ctx.ops.cross_sq * lt.w;
            lt.wm = lt.w.transpose() * ctx.ops.row_sq;
            lt.wqw = lt.w.cwiseProduct(lt.qw).colwise().sum().transpose();
            lt.w2m = lt.w.cwiseAbs2().transpose() * ctx.ops.row_sq;
            CplxMatrix q(n_r, ncols);
            for (Eigen::Index b = 0; b < ncols; ++b) {
                for (Eigen::Index i = 0; i < n_r; ++i) {
                    q(i, b) = lt.residual(i, b) * lt.w(i, b);
                }
            }
            lt.lin = ctx.ops.v.adjoint() * q;
            lt.c1 = ((double(n_t) - 2.0 * theta1 * lt.wm.array() +
                      theta1 * theta1 * lt.wqw.array()) /
                     ctx.h_fro2)
                        .matrix();
            lt.c2 = (theta1 * theta1 * lt.w2m.array() / ctx.h_fro2).matrix();
        }

        // z and the estimated denoiser input variance
        const double theta_lin = (iid || oamp) ? theta1 : 1.0;
        const CplxMatrix z = lt.x_in + theta_lin * lt.lin;

        lt.sigma2raw.resize(n_t, ncols);
        for (Eigen::Index b = 0; b < ncols; ++b) {
            const double hinge = std::max(lt.res2(b) - ctx.n_r_sigma2, 0.0);
            const double c1 = oamp ? lt.c1(b) : mismatch_shared;
            const double c2 = oamp ? lt.c2(b) : gain_shared;
            const double bracket = (c1 * hinge + c2 * ctx.sigma2) / double(n_t);
            if (full) {
                lt.sigma2raw.col(b) = full->noise_scales[t] * bracket;
            } else {
                const double theta2 = iid ? iid->noise_scales[t] : oamp->noise_scales[t];
                lt.sigma2raw.col(b).setConstant(theta2 * bracket);
            }
        }

        // element-wise posterior-mean denoiser, keeping the softmax
        // moments for the backward pass
        lt.x_out.resize(n_t, ncols);
        if (want_grad) {
            lt.var_re.resize(n_t, ncols);
            lt.var_im.resize(n_t, ncols);
            lt.cov_re.resize(n_t, ncols);
            lt.cov_im.resize(n_t, ncols);
        }
        for (Eigen::Index b = 0; b < ncols; ++b) {
            for (Eigen::Index i = 0; i < n_t; ++i) {
                const double s_eff = std::max(lt.sigma2raw(i, b), kSigma2Floor);
                const PamMoments mr = pam_moments(z(i, b).real(), s_eff, c.levels());
                const PamMoments mi = pam_moments(z(i, b).imag(), s_eff, c.levels());
                lt.x_out(i, b) = CplxScalar(mr.mean, mi.mean);
                if (want_grad) {
                    lt.var_re(i, b) = mr.var;
                    lt.var_im(i, b) = mi.var;
                    lt.cov_re(i, b) = mr.cov_dist;
                    lt.cov_im(i, b) = mi.cov_dist;
                }
            }
        }
        x_hat = lt.x_out;
        out.loss_sum += (lt.x_out - x_true).squaredNorm();
        if (!x_hat.allFinite()) {
            throw NumericalError("training forward: non-finite estimate at layer " +
                                 std::to_string(t));
        }
    }
    if (!want_grad) return out;

    // ---- backward ----
    const std::size_t n_params = param_count(params);
    out.grad.assign(n_params, 0.0);
    // flat layout offsets
    const std::size_t noise_off =
        full ? layers * 2 * std::size_t(n_t) * std::size_t(n_r) : layers;

    CplxMatrix g_x = CplxMatrix::Zero(n_t, ncols); // dL/dx_{t+1}, accumulated
    for (std::int32_t ti = std::int32_t(layers) - 1; ti >= 0; --ti) {
        const auto t = std::uint32_t(ti);
        LayerTape& lt = tape[t];
        const double theta1 = iid   ? iid->step_sizes[t]
                              : oamp ? oamp->step_sizes[t]
                                     : 1.0;

        // direct loss term: d/dx_out of |x_out - x|^2
        CplxMatrix g_out = g_x + 2.0 * (lt.x_out - x_true);

        // denoiser: g_z and g_sigma2 from the stored moments
        CplxMatrix g_z(n_t, ncols);
        RealMatrix g_sig(n_t, ncols);
        for (Eigen::Index b = 0; b < ncols; ++b) {
            for (Eigen::Index i = 0; i < n_t; ++i) {
                const double s_eff = std::max(lt.sigma2raw(i, b), kSigma2Floor);
                const double gr = g_out(i, b).real(), gi = g_out(i, b).imag();
                g_z(i, b) = CplxScalar(gr * 2.0 * lt.var_re(i, b) / s_eff,
                                       gi * 2.0 * lt.var_im(i, b) / s_eff);
                const double gs =
                    (gr * lt.cov_re(i, b) + gi * lt.cov_im(i, b)) / (s_eff * s_eff);
                g_sig(i, b) = lt.sigma2raw(i, b) > kSigma2Floor ? gs : 0.0;
            }
        }

        // noise-variance estimator
        RealVector g_s = RealVector::Zero(ncols);
        double g_theta1 = 0.0;
        double g_mismatch = 0.0, g_gain = 0.0;
        RealVector g_c1, g_c2;
        if (oamp) {
            g_c1.setZero(ncols);
            g_c2.setZero(ncols);
        }
        for (Eigen::Index b = 0; b < ncols; ++b) {
            const double hinge = std::max(lt.res2(b) - ctx.n_r_sigma2, 0.0);
            const double c1 = oamp ? lt.c1(b) : 0.0;
            const double c2 = oamp ? lt.c2(b) : 0.0;
            const double mism = oamp ? c1
                                     : (iid ? (double(n_t) - 2.0 * theta1 * ctx.tr_gram +
                                               theta1 * theta1 * ctx.gram_fro2) /
                                                  ctx.h_fro2
                                            : ctx.mismatch[t]);
            const double gn = oamp ? c2 : (iid ? theta1 * theta1 : ctx.gain[t]);
            const double bracket = (mism * hinge + gn * ctx.sigma2) / double(n_t);

            double g_bracket = 0.0;
            if (full) {
                for (Eigen::Index i = 0; i < n_t; ++i) {
                    out.grad[noise_off + t * std::size_t(n_t) + std::size_t(i)] +=
                        g_sig(i, b) * bracket;
                    g_bracket += g_sig(i, b) * full->noise_scales[t](i);
                }
            } else {
                const double theta2 = iid ? iid->noise_scales[t] : oamp->noise_scales[t];
                double col_sum = 0.0;
                for (Eigen::Index i = 0; i < n_t; ++i) col_sum += g_sig(i, b);
                out.grad[noise_off + t] += col_sum * bracket;
                g_bracket = col_sum * theta2;
            }
            const double g_hinge = g_bracket * mism / double(n_t);
            if (lt.res2(b) > ctx.n_r_sigma2) g_s(b) += g_hinge;
            if (oamp) {
                g_c1(b) = g_bracket * hinge / double(n_t);
                g_c2(b) = g_bracket * ctx.sigma2 / double(n_t);
            } else {
                g_mismatch += g_bracket * hinge / double(n_t);
                g_gain += g_bracket * ctx.sigma2 / double(n_t);
            }
        }

        // linear stage
        CplxMatrix g_r; // gradient w.r.t. the stored residual (same basis)
        if (iid) {
            g_theta1 += (lt.lin.conjugate().cwiseProduct(g_z)).sum().real();
            g_theta1 +=
                g_mismatch * (-2.0 * ctx.tr_gram + 2.0 * theta1 * ctx.gram_fro2) / ctx.h_fro2;
            g_theta1 += g_gain * 2.0 * theta1;
            g_r = *ctx.h * (theta1 * g_z).eval();
        } else if (full) {
            // z-path: g_A += g_z residual^H ; estimator path uses the
            // shared Frobenius ratios.
            CplxMatrix g_a = g_z * lt.residual.adjoint();
            g_a.noalias() += g_mismatch * (2.0 / ctx.h_fro2) * (ctx.ah_minus_i[t] * ctx.h_adj);
            g_a += g_gain * (2.0 / ctx.h_fro2) * full->linear_ops[t];
            const std::size_t a_off = t * 2 * std::size_t(n_t) * std::size_t(n_r);
            std::size_t k = a_off;
            for (Eigen::Index i = 0; i < n_t; ++i) {
                for (Eigen::Index j = 0; j < n_r; ++j) {
                    out.grad[k++] += g_a(i, j).real();
                    out.grad[k++] += g_a(i, j).imag();
                }
            }
            g_r = full->linear_ops[t].adjoint() * g_z;
        } else {
            // oampnet: z-path, per-sample ratio paths, then w -> v2 -> s.
            g_theta1 += (lt.lin.conjugate().cwiseProduct(g_z)).sum().real();
            const CplxMatrix g_q = ctx.ops.v * (theta1 * g_z).eval();
            RealMatrix g_w =
                (lt.residual.conjugate().cwiseProduct(g_q)).real(); // Re(conj(r) g_q)
            for (Eigen::Index b = 0; b < ncols; ++b) {
                g_theta1 += g_c1(b) * (-2.0 * lt.wm(b) + 2.0 * theta1 * lt.wqw(b)) / ctx.h_fro2;
                g_theta1 += g_c2(b) * 2.0 * theta1 * lt.w2m(b) / ctx.h_fro2;
                const double g_wm = -2.0 * theta1 * g_c1(b) / ctx.h_fro2;
                const double g_wqw = theta1 * theta1 * g_c1(b) / ctx.h_fro2;
                const double g_w2m = theta1 * theta1 * g_c2(b) / ctx.h_fro2;
                g_w.col(b) += g_wm * ctx.ops.row_sq;
                g_w.col(b) += 2.0 * g_wqw * lt.qw.col(b);
                g_w.col(b) +=
                    2.0 * g_w2m * lt.w.col(b).cwiseProduct(ctx.ops.row_sq);
                // w_i = 1 / (v2 lambda_i + sigma2)
                const double g_v2 =
                    -(g_w.col(b).cwiseProduct(lt.w.col(b).cwiseAbs2()).dot(ctx.ops.lambda));
                if ((lt.res2(b) - ctx.n_r_sigma2) / ctx.h_fro2 > kOampVarFloor) {
                    g_s(b) += g_v2 / ctx.h_fro2;
                }
            }
            g_r.resize(n_r, ncols);
            for (Eigen::Index b = 0; b < ncols; ++b) {
                for (Eigen::Index i = 0; i < n_r; ++i) {
                    g_r(i, b) = g_q(i, b) * lt.w(i, b);
                }
            }
        }

        if (iid || oamp) {
            out.grad[t] += g_theta1;
        }

        // |residual|^2 path and the residual's dependence on x_in
        for (Eigen::Index b = 0; b < ncols; ++b) {
            if (g_s(b) != 0.0) g_r.col(b) += 2.0 * g_s(b) * lt.residual.col(b);
        }
        if (oamp) {
            g_x = g_z - ctx.ops.v.adjoint() * g_r;
        } else {
            g_x = g_z - ctx.h_adj * g_r;
        }
    }
    return out;
}

struct EngineResult {
    double loss = 0.0;
    std::vector<double> grad; // normalized, empty when not requested
};

EngineResult run_engine(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                        const ModelParams& params, bool want_grad) {
    const EngineCtx ctx = make_ctx(h, c, batch, params);
    const Eigen::Index total = batch.y.cols();
    const auto* iid = std::get_if<IidParams>(&params);
    const auto* full = std::get_if<FullParams>(&params);
    const auto* oamp = std::get_if<OampNetParams>(&params);
    const std::uint32_t layers = iid ? iid->layers() : full ? full->layers() : oamp->layers();

    // Fixed chunk decomposition: the reduction below runs in chunk order,
    // so results do not depend on the worker count.
    const Eigen::Index n_chunks = std::min<Eigen::Index>(total, 16);
    std::vector<ChunkResult> partial(std::size_t(n_chunks));
    parallel_for_chunks(std::size_t(n_chunks), [&](std::size_t k) {
        const Eigen::Index lo = Eigen::Index(k) * total / n_chunks;
        const Eigen::Index hi = Eigen::Index(k + 1) * total / n_chunks;
        partial[k] = run_chunk(ctx, params, lo, hi - lo, want_grad);
    });

    EngineResult res;
    const double norm = 1.0 / (double(layers) * double(total));
    for (const auto& p : partial) res.loss += p.loss_sum;
    res.loss *= norm;
    if (want_grad) {
        res.grad.assign(param_count(params), 0.0);
        for (const auto& p : partial) {
            for (std::size_t i = 0; i < res.grad.size(); ++i) res.grad[i] += p.grad[i];
        }
        for (double& g : res.grad) g *= norm;
    }
    return res;
}

} // namespace

double batch_loss(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                  const ModelParams& params) {
    return run_engine(h, c, batch, params, false).loss;
}

BatchEval backward(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                   const ModelParams& params) {
    EngineResult r = run_engine(h, c, batch, params, true);
    BatchEval eval;
    eval.loss = r.loss;
    eval.grads.values = std::move(r.grad);
    for (double g : eval.grads.values) {
        if (!std::isfinite(g)) throw NumericalError("backward: non-finite gradient");
    }
    return eval;
}

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state) {
    std::vector<double> flat = flatten_params(params);
    if (grads.values.size() != flat.size() || state.m.size() != flat.size()) {
        throw ContractError("adam_step: shape mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double g = grads.values[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        flat[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    unflatten_params(params, flat);
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

TrainOutcome train_loop(const Constellation& c, const TrainConfig& cfg, ModelParams params,
                        AdamState& state,
                        const std::function<const CplxMatrix&(std::uint32_t)>& channel_at) {
    cfg.validate();
    // Held-out batch from a reserved namespace: training never consumes it.
    RngStream held_rng = derive_stream(cfg.seed, stream_ns::heldout, {cfg.stream_tag});
    const CplxMatrix& h0 = channel_at(0);
    const TrainingBatch heldout = sample_training_batch(h0, c, cfg.batch_size, cfg.snr_db_lo,
                                                        cfg.snr_db_hi, held_rng);

    TrainOutcome out;
    out.heldout_loss_initial = batch_loss(h0, c, heldout, params);
    for (std::uint32_t k = 0; k < cfg.iterations; ++k) {
        const CplxMatrix& h = channel_at(k);
        RngStream rng = derive_stream(cfg.seed, stream_ns::training, {cfg.stream_tag, k});
        const TrainingBatch batch =
            sample_training_batch(h, c, cfg.batch_size, cfg.snr_db_lo, cfg.snr_db_hi, rng);
        BatchEval eval;
        try {
            eval = backward(h, c, batch, params);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (training iteration " +
                                 std::to_string(k) + ")");
        }
        adam_step(params, eval.grads, state);
    }
    out.heldout_loss_final = batch_loss(channel_at(0), c, heldout, params);
    out.improved = cfg.iterations == 0 || out.heldout_loss_final < out.heldout_loss_initial;
    out.params = std::move(params);
    return out;
}

} // namespace

TrainOutcome train_on_channel(const CplxMatrix& h, const Constellation& c,
                              const TrainConfig& cfg, const ModelParams& init) {
    AdamState state = make_adam_state(param_count(init), cfg.learning_rate);
    return train_loop(c, cfg, init, state, [&](std::uint32_t) -> const CplxMatrix& {
        return h;
    });
}

ModelParams train_offline(ModelKind kind, std::uint32_t n_r, std::uint32_t n_t,
                          const Constellation& c, const TrainConfig& cfg) {
    if (kind == ModelKind::mmnet) {
        throw ContractError("train_offline: mmnet parameters are channel-specific");
    }
    cfg.validate();
    ModelParams params = kind == ModelKind::mmnet_iid
                             ? ModelParams(init_iid_params(10))
                             : ModelParams(init_oampnet_params(10));
    AdamState state = make_adam_state(param_count(params), cfg.learning_rate);
    // One fresh i.i.d. channel per batch, keyed by the iteration index.
    std::vector<CplxMatrix> slot(1);
    auto channel_at = [&](std::uint32_t k) -> const CplxMatrix& {
        RngStream rng = derive_stream(cfg.seed, stream_ns::channel, {cfg.stream_tag, k});
        slot[0] = gen_iid_gaussian(n_r, n_t, rng).h;
        return slot[0];
    };
    return train_loop(c, cfg, std::move(params), state, channel_at).params;
}

IidParams train_offline_iid(std::uint32_t n_r, std::uint32_t n_t, const Constellation& c,
                            const TrainConfig& cfg) {
    return std::get<IidParams>(train_offline(ModelKind::mmnet_iid, n_r, n_t, c, cfg));
}

OnlineTrainResult online_train_grid(const ChannelGrid& grid, const Constellation& c,
                                    std::uint32_t first_iters, std::uint32_t rest_iters,
                                    const TrainConfig& cfg) {
    cfg.validate();
    if (grid.cells.empty()) throw ContractError("online_train_grid: empty grid");

    OnlineTrainResult result;
    result.table.resize(grid.cells.size());

    ModelParams params = init_full_params(grid.cell(0, 0).h, 10);
    AdamState state = make_adam_state(param_count(params), cfg.learning_rate);
    for (std::uint32_t n = 0; n < grid.t_count; ++n) {
        for (std::uint32_t f = 0; f < grid.f_count; ++f) {
            TrainConfig step_cfg = cfg;
            step_cfg.iterations = (f == 0) ? first_iters : rest_iters;
            step_cfg.stream_tag = stream_hash({cfg.stream_tag, n, f});
            const CplxMatrix& h = grid.cell(f, n).h;
            TrainOutcome out = train_loop(c, step_cfg, std::move(params), state,
                                          [&](std::uint32_t) -> const CplxMatrix& { return h; });
            params = std::move(out.params);
            result.table[std::size_t(f) * grid.t_count + n] = std::get<FullParams>(params);
            result.total_iterations += step_cfg.iterations;
        }
    }
    return result;
}

} // namespace mimo
