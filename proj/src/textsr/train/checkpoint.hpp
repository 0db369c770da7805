#pragma once

#include <memory>

#include "textsr/core/adam.hpp"
#include "textsr/diffusion/schedule.hpp"
#include "textsr/model/mrd.hpp"
#include "textsr/model/tem.hpp"
#include "textsr/text/recognizer.hpp"
#include "textsr/train/config.hpp"

namespace textsr::train {

// Everything a forward pass needs, with stable addresses (the enhancement
// module keeps a pointer to the recognizer). Non-copyable.
struct ModelBundle {
    TrainConfig cfg;
    diffusion::NoiseSchedule sched;
    text::Recognizer recognizer;
    model::Tem tem;
    model::Mrd mrd;

    ModelBundle() = default;
    ModelBundle(const ModelBundle&) = delete;
    ModelBundle& operator=(const ModelBundle&) = delete;

    nn::ParamMap trainable_params();  // tem + mrd
    nn::ParamMap all_params();        // + recognizer
};

// Fresh models: recognizer weights come from a pretrained file, TEM/MRD
// initialized from cfg.seed. The recognizer is frozen.
void build_models(const TrainConfig& cfg, const std::string& recognizer_path, ModelBundle& out);

// Checkpoint archive: config text, iteration, trainer RNG state, loss-tail
// text, and every named weight (frozen recognizer copy included) plus
// optimizer moments. The schedule is re-derived from the config on load.
struct TrainerState {
    int64_t iteration = 0;
    std::string rng_state;
    std::string loss_tail;
};

void save_checkpoint(const std::string& path, ModelBundle& models, const AdamW* opt,
                     const TrainerState& state);

// Rebuilds models from the stored config and restores weights bit-exactly.
// opt/state may be null when only inference is needed.
void load_checkpoint(const std::string& path, ModelBundle& out, AdamW* opt = nullptr,
                     TrainerState* state = nullptr);

}  // namespace textsr::train
