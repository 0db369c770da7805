#pragma once

#include <functional>

#include "textsr/diffusion/schedule.hpp"
#include "textsr/model/unet.hpp"

namespace textsr::model {

// A denoiser maps (x_t, t, x_sr, x_m) to an estimate of the clean value
// (the residual in x0-prediction mode, the noise in noise-prediction
// mode). Tests and the oracle-exactness checks inject mock functions here.
using DenoiserFn =
    std::function<Val(Graph&, Val x_t, const std::vector<int>& ts, Val x_sr, Val x_m)>;

// Mask-guided residual diffusion module: the conditional U-Net plus the
// losses it trains under. Conditioning enters as channel concatenation
// [x_t | x_sr | x_m] and again as mask gating in the bottleneck.
class Mrd {
public:
    UNet net;

    void init(const UNetConfig& config, Rng& rng) { net.init(config, rng); }

    // x_t (N,3,H,W), x_sr (N,3,H,W), x_m (N,1,H,W) -> (N,3,H,W)
    Val denoise(Graph& g, Val x_t, const std::vector<int>& ts, Val x_sr, Val x_m) const;

    DenoiserFn denoiser() const;

    void collect(nn::ParamMap& m, const std::string& prefix = "mrd") const {
        net.collect(m, prefix);
    }
    int64_t parameter_count() const { return net.parameter_count(); }
};

// RMS(x0 - f(q_sample(x0, t, z), t, x_sr, x_m)) with per-sample timesteps;
// x0 and z enter as constants, gradients flow into f and the conditioning.
Val dm_loss(const DenoiserFn& f, Graph& g, const Tensor& x0, const std::vector<int>& ts,
            const Tensor& z, Val x_sr, Val x_m, const diffusion::NoiseSchedule& sched);

// Noise-prediction variant of the objective: the same network learns z
// instead of x0 (ablation). Returns both the loss and the converted
// residual estimate for the edge term.
struct NoisePredResult {
    Val loss;
    Val x0_hat;
};
NoisePredResult dm_loss_noise_mode(const DenoiserFn& f, Graph& g, const Tensor& x0,
                                   const std::vector<int>& ts, const Tensor& z, Val x_sr,
                                   Val x_m, const diffusion::NoiseSchedule& sched);

// Converts a noise estimate back to x0 per sample (inference path of the
// noise-prediction ablation).
Tensor x0_from_noise(const Tensor& x_t, const Tensor& z_hat, int t,
                     const diffusion::NoiseSchedule& sched);

// Forms x_t = q_sample per sample (batched helper used by the trainer).
Tensor q_sample_batch(const Tensor& x0, const std::vector<int>& ts, const Tensor& z,
                      const diffusion::NoiseSchedule& sched);

}  // namespace textsr::model
