#pragma once

#include <string>

#include "textsr/model/tem.hpp"
#include "textsr/model/unet.hpp"

namespace textsr::train {

// Joint training configuration; flat key=value text on disk. Defaults are
// the full-scale settings; configs/desk.cfg scales the networks down for
// CPU runs.
struct TrainConfig {
    // diffusion schedule
    int T = 200;
    real beta_min = 1e-6;
    real beta_max = 1e-2;

    // optimization
    real lr = 1e-4;
    int batch = 16;
    real weight_decay = 1e-4;
    real clip_norm = 1.0;
    int iters = 20000;
    uint64_t seed = 0;

    // loss weights: total = l1*GP + l2*Mask + TP + Edge + DM + l*joint
    real lambda_joint = 5.0;
    real lambda_gp = 0.5;
    real lambda_mask = 3.0;

    // ablation switches
    bool no_mask_branch = false;
    bool noise_prediction = false;
    bool plain_unet = false;
    bool no_joint_loss = false;

    // model sizes
    model::TemConfig tem;
    model::UNetConfig unet;

    // bookkeeping
    int log_every = 1;
    int checkpoint_every = 2000;

    std::string to_text() const;
    static TrainConfig from_text(const std::string& text);
    static TrainConfig load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;

    // comma-separated flag list, e.g. "no_mask_branch,noise_prediction"
    void apply_ablation(const std::string& flags);
};

}  // namespace textsr::train
