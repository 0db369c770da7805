#pragma once

#include <map>
#include <string>

#include "textsr/core/nn.hpp"

namespace textsr {

// AdamW with decoupled weight decay and global-norm gradient clipping.
// Moment buffers are keyed by parameter name so they serialize alongside
// checkpoints and training can resume exactly.
class AdamW {
public:
    real lr = 1e-4;
    real beta1 = 0.9;
    real beta2 = 0.999;
    real eps = 1e-8;
    real weight_decay = 1e-4;
    real clip_norm = 1.0;  // <= 0 disables clipping

    // Applies one update from the gradients accumulated in g. Parameters
    // without a gradient (frozen or unused this step) are skipped entirely.
    // Returns the pre-clip global gradient norm.
    real step(const nn::ParamMap& params, Graph& g);

    int64_t steps_taken() const { return t_; }

    // State round-trip for checkpointing.
    std::map<std::string, Tensor> export_state() const;
    void import_state(const std::map<std::string, Tensor>& s, int64_t t);

private:
    struct Moments {
        Tensor m, v;
    };
    std::map<std::string, Moments> state_;
    int64_t t_ = 0;
};

}  // namespace textsr
