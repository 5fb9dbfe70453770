#pragma once

#include <cstdint>
#include <vector>

#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"
#include "mimo/models.hpp"

namespace mimo {

/// Bias-corrected Adam over the flat real-coordinate parameter view.
struct AdamState {
    std::vector<double> m; // first moments
    std::vector<double> v; // second moments
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(std::size_t param_count, double lr = 1e-3);

struct TrainConfig {
    std::uint32_t batch_size = 500;
    std::uint32_t iterations = 1000;
    double snr_db_lo = 4.0;
    double snr_db_hi = 9.0;
    std::uint64_t seed = 0;
    /// Discriminates independent training runs sharing one seed
    /// (e.g. the channel index of a per-channel sweep).
    std::uint64_t stream_tag = 0;
    double learning_rate = 1e-3;

    void validate() const;
};

/// Gradients in the flatten_params() layout of the parameter set they
/// differentiate.
struct GradientSet {
    std::vector<double> values;
};

/// One training batch on a fixed channel: unit-power symbol points
/// (N_t x B), received signals (N_r x B) and the shared noise variance.
struct TrainingBatch {
    CplxMatrix x_points;
    CplxMatrix y;
    double sigma2 = 0.0;
    double snr_db = 0.0;
};

/// Batch drawn from the per-iteration stream: one uniform SNR draw, then
/// uniform symbols, then receiver noise.
TrainingBatch sample_training_batch(const CplxMatrix& h, const Constellation& c,
                                    std::uint32_t batch_size, double snr_db_lo,
                                    double snr_db_hi, RngStream& rng);

/// Multi-layer L2 objective: mean over the batch of
/// (1/T) sum_t |x_t - x|^2 with x as constellation points.
double loss(const std::vector<ForwardTrace>& traces, const std::vector<SymbolVector>& truth,
            const Constellation& c);

/// Batched objective via the training engine (identical layer math to the
/// per-problem forwards in models.hpp).
double batch_loss(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                  const ModelParams& params);

/// Objective and exact reverse-mode gradients w.r.t. every parameter.
/// The gradient flows through the noise-variance estimators (hinge
/// subgradient 0 at the kink, variance floor treated the same way) and
/// through the denoiser via its analytic Jacobian.
struct BatchEval {
    double loss = 0.0;
    GradientSet grads;
};
BatchEval backward(const CplxMatrix& h, const Constellation& c, const TrainingBatch& batch,
                   const ModelParams& params);

/// One bias-corrected Adam update; increments state.step.
void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state);

struct TrainOutcome {
    ModelParams params;
    double heldout_loss_initial = 0.0;
    double heldout_loss_final = 0.0;
    /// False flags a run whose held-out loss failed to improve.
    bool improved = false;
};

/// cfg.iterations rounds of sample / forward / backward / adam on the
/// fixed channel h, starting from init. Deterministic in (h, cfg, init).
TrainOutcome train_on_channel(const CplxMatrix& h, const Constellation& c,
                              const TrainConfig& cfg, const ModelParams& init);

/// Channel-agnostic offline training: every batch draws a fresh i.i.d.
/// Gaussian channel. kind must have channel-independent parameters
/// (mmnet-iid or oampnet).
ModelParams train_offline(ModelKind kind, std::uint32_t n_r, std::uint32_t n_t,
                          const Constellation& c, const TrainConfig& cfg);
IidParams train_offline_iid(std::uint32_t n_r, std::uint32_t n_t, const Constellation& c,
                            const TrainConfig& cfg);

/// Locality-exploiting online training over a channel grid: per time
/// index, first_iters gradient iterations on the first subcarrier, then
/// rest_iters on each subsequent one, always warm-starting from the most
/// recently trained parameters. Snapshots one parameter set per cell.
struct OnlineTrainResult {
    std::vector<FullParams> table; // indexed f * t_count + t
    std::uint64_t total_iterations = 0;

    const FullParams& at(std::uint32_t f, std::uint32_t t, std::uint32_t t_count) const {
        return table.at(std::size_t(f) * t_count + t);
    }
};
OnlineTrainResult online_train_grid(const ChannelGrid& grid, const Constellation& c,
                                    std::uint32_t first_iters, std::uint32_t rest_iters,
                                    const TrainConfig& cfg);

/// Paper-protocol SNR training ranges per modulation at the 64x32
/// i.i.d. benchmark scale.
void default_snr_range(std::uint32_t order, double& lo, double& hi);

} // namespace mimo
