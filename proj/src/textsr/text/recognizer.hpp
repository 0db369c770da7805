#pragma once

#include <string>
#include <vector>

#include "textsr/core/adam.hpp"
#include "textsr/core/nn.hpp"
#include "textsr/core/serialize.hpp"
#include "textsr/text/charset.hpp"
#include "textsr/text/ctc.hpp"

namespace textsr::text {

// Column-wise character probabilities, one row per sequence position.
struct TextPrior {
    Tensor probs;  // (L, num_classes), rows sum to 1
};

struct FeatureStack {
    std::vector<Tensor> features;  // tapped activation maps, batch dim 1
};

struct RecognizerConfig {
    std::string charset = "0123456789";
    int base = 24;        // first conv width; the second block uses 2x
    int deep = 64;        // width of the three deepest conv blocks
    int gru_hidden = 48;  // per direction
    int feature_taps = 3;
};

// Conv stack (5 blocks, two height-pooling stages), height collapse to a
// 1xL feature row, one bidirectional recurrent layer, linear class head.
// Serves as text-prior generator, perceptual feature extractor, and the
// evaluation recognizer.
class Recognizer {
public:
    RecognizerConfig cfg;
    Charset charset;

    nn::Conv2d c1, c2, c3, c4, c5;
    nn::BiGRU rnn;
    nn::Linear head;

    void init(const RecognizerConfig& config, Rng& rng);

    // Full forward on a batch (N,3,H,W): logits (L, N, num_classes) where
    // L = W/4. Also exposes the first `feature_taps` activations and the
    // recurrent feature sequence (L, N, 2*gru_hidden) for the prior path.
    struct Forward {
        Val logits;
        Val feat_seq;
        std::vector<Val> taps;
    };
    Forward forward(Graph& g, Val imgs) const;

    // Encoder + head pieces for the prior path (frozen weights, trainable
    // adapter lives in the enhancement module).
    Val encode_seq(Graph& g, Val imgs) const;  // (L, N, 2*gru_hidden)
    Val apply_head(Graph& g, Val seq) const;   // (L, N, num_classes)

    // Single image (3,H,W) in inference mode.
    std::pair<std::string, TextPrior> recognize(const Tensor& img) const;

    FeatureStack extract_features(const Tensor& img) const;

    // Sum over taps of mean L1 feature distance, differentiable w.r.t. the
    // graph inputs; weights stay frozen.
    Val perceptual_loss(Graph& g, Val pred, Val target) const;

    // CTC negative log-likelihood of labels under prior logits (L,N,C).
    Val tp_loss(Val prior_logits, const std::vector<std::string>& labels) const;

    void collect(nn::ParamMap& m, const std::string& prefix = "rec") const;
    void freeze();
    bool frozen() const { return frozen_; }
    uint64_t checksum() const;

    void save(const std::string& path) const;
    static Recognizer load(const std::string& path);

private:
    bool frozen_ = false;
};

}  // namespace textsr::text
