#pragma once

#include <optional>
#include <string>

#include "textsr/data/corpus.hpp"
#include "textsr/train/checkpoint.hpp"

namespace textsr::train {

struct LossRecord {
    int64_t step = 0;
    real gp = 0, mask = 0, tp = 0, edge = 0, dm = 0, joint = 0, total = 0;

    std::string tsv_line() const;
    static std::string tsv_header();
};

// Shared forward pieces of the diffusion objective so the trainer and the
// standalone dm_loss surface cannot drift apart.
struct DmParts {
    Val x_t;
    Val prediction;  // raw network output
    Val x0_hat;      // residual estimate (converted in noise mode)
    Val dm;          // scalar loss
};
DmParts make_dm_parts(const model::DenoiserFn& f, Graph& g, const Tensor& x0,
                      const std::vector<int>& ts, const Tensor& z, Val x_sr, Val x_m,
                      const diffusion::NoiseSchedule& sched, bool noise_mode);

// Joint trainer over a loaded corpus. Single process, single data worker;
// every random draw comes from one engine seeded by the config, so runs
// with equal seeds produce identical loss records.
class Trainer {
public:
    Trainer(ModelBundle& models, const data::Corpus& corpus);

    LossRecord train_step();

    // Full loop: metrics log (TSV), periodic checkpoints, final checkpoint
    // at <out_dir>/checkpoint.tsck. Returns the final record.
    LossRecord run_training(const std::string& out_dir);

    void resume_from(const std::string& checkpoint_path);

    int64_t iteration() const { return iter_; }
    const std::vector<LossRecord>& history() const { return history_; }
    std::string rng_state() const { return rng_.save_state(); }

    AdamW opt;

private:
    struct Batch {
        Tensor lr_up, hr, mask_gt;
        std::vector<std::string> labels;
    };
    Batch sample_batch();
    std::string tail_text(size_t keep = 100) const;

    ModelBundle& m_;
    const data::Corpus& corpus_;
    Rng rng_;
    int64_t iter_ = 0;
    std::vector<LossRecord> history_;
    std::vector<Tensor> lr_up_cache_;
};

// Recognizer pretraining on clean HR crops with light augmentation.
struct RecTrainConfig {
    int iters = 3000;
    int batch = 32;
    real lr = 1e-3;
    real weight_decay = 1e-4;
    uint64_t seed = 1;
    real aug_prob = 0.3;
    real aug_blur_max = 0.6;
    real aug_noise = 0.02;
    int log_every = 100;
};

// Returns the final averaged CTC loss. Progress lines go to stdout when
// verbose.
real pretrain_recognizer(text::Recognizer& rec, const data::Corpus& corpus,
                         const RecTrainConfig& cfg, bool verbose = false);

// Exact-match sequence accuracy (case-insensitive) of greedy decoding on
// the given images ("hr" or "lr"-upsampled).
real recognizer_accuracy(const text::Recognizer& rec, const data::Corpus& corpus,
                         bool use_hr = true);

}  // namespace textsr::train
