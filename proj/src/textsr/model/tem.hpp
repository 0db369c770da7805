#pragma once

#include "textsr/core/nn.hpp"
#include "textsr/text/recognizer.hpp"

namespace textsr::model {

struct TemConfig {
    int channels = 64;       // feature width of the deblurring branch
    int blocks = 5;          // number of wavelet residual blocks
    int mask_channels = 32;  // width of the mask branch
};

// Text Enhancement Module.
//
// The deblurring branch runs a semantic block first: a text prior comes
// from the frozen recognizer encoder plus a trainable zero-initialized
// adapter head, and a single cross-attention layer injects the prior
// sequence into the image features (queries are height-averaged feature
// columns). The features then pass through `blocks` wavelet residual
// blocks, each combining a conv + width-direction BiGRU path with a conv
// path on the Haar subbands, merged by inverse transform and a residual
// add. The mask branch is an independent conv stack with a sigmoid head.
class Tem {
public:
    TemConfig cfg;
    const text::Recognizer* recognizer = nullptr;  // frozen, not owned

    struct WaveletBlock {
        nn::Conv2d conv1;
        nn::BiGRU gru;
        nn::Conv2d gru_proj;   // 1x1, 2C -> C
        nn::Conv2d wav1, wav2;
    };

    nn::Conv2d stem;
    nn::Linear prior_adapter;       // zero-init; adds to the frozen head logits
    nn::CrossAttentionSeq fuse;
    std::vector<WaveletBlock> blocks;
    nn::Conv2d out_conv;

    nn::Conv2d m1, m2, m3, m4, m_head;

    struct Output {
        Val x_sr;          // (N,3,32,128) in (-1,1), tanh bounded
        Val x_m;           // (N,1,32,128) in [0,1]
        Val prior_logits;  // (L,N,num_classes)
    };

    void init(const TemConfig& config, const text::Recognizer* rec, Rng& rng);
    Output forward(Graph& g, Val lr_up) const;

    // Mask branch alone (cascade mode runs it on an external SR image).
    Val mask_forward(Graph& g, Val img) const;

    void collect(nn::ParamMap& m, const std::string& prefix = "tem") const;
};

}  // namespace textsr::model
