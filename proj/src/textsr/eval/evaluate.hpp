#pragma once

#include "textsr/data/corpus.hpp"
#include "textsr/pipeline/infer.hpp"

namespace textsr::eval {

struct SampleMetrics {
    int index = 0;
    std::string label;
    real psnr_db = 0, ssim_v = 0, edge = 0;
    bool correct = false;
    std::string decoded;
};

struct EvalReport {
    int count = 0;
    std::vector<SampleMetrics> model_rows;
    std::vector<SampleMetrics> bicubic_rows;  // baseline, always present
    real model_psnr = 0, model_ssim = 0, model_acc = 0, model_edge = 0;
    real bicubic_psnr = 0, bicubic_ssim = 0, bicubic_acc = 0, bicubic_edge = 0;
    std::string config_echo;

    std::string to_tsv() const;     // per-sample rows, model and baseline
    std::string summary() const;    // human-readable aggregate block
    void write(const std::string& out_dir) const;
};

// Scores a set of SR images (one per corpus sample) against ground truth
// with the bundle's recognizer; also scores the bicubic baseline.
EvalReport evaluate_images(const train::ModelBundle& models, const data::Corpus& corpus,
                           const std::vector<Tensor>& sr_images);

// Runs full inference over the corpus at the given plan, then scores.
EvalReport evaluate(const train::ModelBundle& models, const data::Corpus& corpus,
                    const diffusion::TimestepPlan& plan, uint64_t seed = 0, int batch = 16);

}  // namespace textsr::eval
