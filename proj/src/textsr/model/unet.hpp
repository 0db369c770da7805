#pragma once

#include "textsr/core/nn.hpp"

namespace textsr::model {

struct UNetConfig {
    int in_channels = 7;  // x_t | x_sr | x_m
    int base = 64;
    std::vector<int> mults = {1, 2, 4, 4};
    int res_blocks = 2;           // residual blocks per resolution
    real dropout = 0.1;
    int attn_tail = 2;            // self-attention at this many deepest resolutions
    int temb_dim = 0;             // 0 -> 4*base
    std::vector<int> gdb_dilations = {1, 2, 4};
    bool gated_bottleneck = true;  // false gives the plain two-stage U-Net

    void validate() const;
    int levels() const { return static_cast<int>(mults.size()); }
};

// Conditional U-Net with sinusoidal timestep embedding added in every
// residual block and gated dilated conv blocks at the bottleneck. The
// gating branch sees the channel-concatenated features and the mask pooled
// to bottleneck resolution. Output conv is zero-initialized.
class UNet {
public:
    UNetConfig cfg;

    struct ResBlock {
        nn::GroupNorm n1, n2;
        nn::Conv2d conv1, conv2, skip;
        nn::Linear temb;
        bool has_skip = false;
    };
    struct GatedDilatedBlock {
        nn::Conv2d feat;  // dilated 3x3
        nn::Conv2d gate;  // 3x3 over [h | mask]
    };

    nn::Linear temb1, temb2;
    nn::Conv2d in_conv;
    std::vector<ResBlock> enc_res;
    std::vector<nn::SelfAttention2d> enc_attn;  // parallel to enc_res, channels 0 = absent
    std::vector<int> enc_attn_idx;
    std::vector<nn::Conv2d> down;
    ResBlock mid1, mid2;
    std::vector<GatedDilatedBlock> gdb;
    nn::SelfAttention2d mid_attn;
    std::vector<ResBlock> dec_res;
    std::vector<int> dec_attn_idx;
    std::vector<nn::SelfAttention2d> dec_attn;
    std::vector<nn::Conv2d> up;
    nn::GroupNorm out_norm;
    nn::Conv2d out_conv;

    void init(const UNetConfig& config, Rng& rng);

    // x (N,Cin,H,W), per-sample integer timesteps, mask (N,1,H,W).
    Val forward(Graph& g, Val x, const std::vector<int>& ts, Val mask) const;

    void collect(nn::ParamMap& m, const std::string& prefix = "unet") const;
    int64_t parameter_count() const;

private:
    Val res_forward(Graph& g, const ResBlock& rb, Val x, Val temb) const;
    void init_res(ResBlock& rb, int cin, int cout, Rng& rng);
};

}  // namespace textsr::model
