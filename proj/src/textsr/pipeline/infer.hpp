#pragma once

#include "textsr/data/corpus.hpp"
#include "textsr/train/checkpoint.hpp"

namespace textsr::pipeline {

struct InferenceRequest {
    Tensor input;  // (3,16,64) LR for full mode; (3,32,128) SR for cascade
    diffusion::TimestepPlan plan;
    uint64_t seed = 0;
    bool cascade = false;
};

// Full mode: bicubic-upsample the LR input, run both enhancement branches,
// then the deterministic reverse diffusion over the plan; returns
// clamp(x_sr + x0_hat). Cascade mode skips the deblurring branch: the
// provided SR image is the condition and the mask branch runs on it.
// `override_f` substitutes the denoiser (oracle/mocks in tests).
Tensor infer_one(const train::ModelBundle& models, const InferenceRequest& req,
                 const model::DenoiserFn* override_f = nullptr);

// Batched variant over many inputs; per-sample noise is seeded by
// (seed + index) so results do not depend on the batch split.
std::vector<Tensor> infer_many(const train::ModelBundle& models,
                               const std::vector<Tensor>& inputs,
                               const diffusion::TimestepPlan& plan, uint64_t seed, bool cascade,
                               int batch_size, const model::DenoiserFn* override_f = nullptr);

}  // namespace textsr::pipeline
