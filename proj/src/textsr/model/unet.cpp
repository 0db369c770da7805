#include "textsr/model/unet.hpp"

#include <numeric>

namespace textsr::model {

namespace o = textsr::ops;

void UNetConfig::validate() const {
    if (base < 1 || mults.empty()) throw std::invalid_argument("UNetConfig: bad base/mults");
    for (size_t i = 1; i < mults.size(); ++i)
        if (mults[i] < mults[i - 1])
            throw std::invalid_argument("UNetConfig: multipliers must be non-decreasing");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("UNetConfig: dropout in [0,1)");
    if (res_blocks < 1) throw std::invalid_argument("UNetConfig: res_blocks >= 1");
    if (attn_tail < 0 || attn_tail > levels())
        throw std::invalid_argument("UNetConfig: attn_tail out of range");
}

namespace {

int norm_groups(int channels) { return std::gcd(channels, 8); }

}  // namespace

void UNet::init_res(ResBlock& rb, int cin, int cout, Rng& rng) {
    rb.n1.init(cin, norm_groups(cin));
    rb.conv1.init(cin, cout, 3, rng);
    rb.n2.init(cout, norm_groups(cout));
    rb.conv2.init(cout, cout, 3, rng);
    rb.temb.init(cfg.temb_dim, cout, rng);
    rb.has_skip = cin != cout;
    if (rb.has_skip) rb.skip.init(cin, cout, 1, rng);
}

Val UNet::res_forward(Graph& g, const ResBlock& rb, Val x, Val temb) const {
    auto* b = const_cast<ResBlock*>(&rb);
    Val h = b->conv1(g, o::silu(b->n1(g, x)));
    h = o::add_nc(h, b->temb(g, o::silu(temb)));
    h = b->conv2(g, o::dropout(o::silu(b->n2(g, h)), cfg.dropout));
    Val s = rb.has_skip ? b->skip(g, x) : x;
    return o::add(h, s);
}

void UNet::init(const UNetConfig& config, Rng& rng) {
    cfg = config;
    if (cfg.temb_dim <= 0) cfg.temb_dim = 4 * cfg.base;
    cfg.validate();
    const int L = cfg.levels();

    temb1.init(cfg.base, cfg.temb_dim, rng);
    temb2.init(cfg.temb_dim, cfg.temb_dim, rng);
    in_conv.init(cfg.in_channels, cfg.base, 3, rng);

    int ch = cfg.base;
    for (int i = 0; i < L; ++i) {
        const int cout = cfg.base * cfg.mults[i];
        const bool attn_here = i >= L - cfg.attn_tail;
        for (int r = 0; r < cfg.res_blocks; ++r) {
            enc_res.emplace_back();
            init_res(enc_res.back(), ch, cout, rng);
            ch = cout;
            if (attn_here) {
                enc_attn_idx.push_back(static_cast<int>(enc_res.size()) - 1);
                enc_attn.emplace_back();
                enc_attn.back().init(ch, rng);
            }
        }
        if (i + 1 < L) {
            // pooled downsampling keeps every conv on the stride-1 fast path
            down.emplace_back();
            down.back().init(ch, ch, 3, rng);
        }
    }

    init_res(mid1, ch, ch, rng);
    if (cfg.gated_bottleneck) {
        for (int d : cfg.gdb_dilations) {
            gdb.emplace_back();
            gdb.back().feat.init(ch, ch, 3, rng, 1, d, d);
            gdb.back().gate.init(ch + 1, ch, 3, rng);
        }
    } else {
        // plain bottleneck: same parameter count, dilation 1, no gating;
        // the gate convs stay allocated so the two modes share checkpoints
        for (size_t k = 0; k < cfg.gdb_dilations.size(); ++k) {
            gdb.emplace_back();
            gdb.back().feat.init(ch, ch, 3, rng, 1, 1, 1);
            gdb.back().gate.init(ch + 1, ch, 3, rng);
        }
    }
    mid_attn.init(ch, rng);
    init_res(mid2, ch, ch, rng);

    for (int i = L - 1; i >= 0; --i) {
        const int cout = cfg.base * cfg.mults[i];
        const bool attn_here = i >= L - cfg.attn_tail;
        for (int r = 0; r < cfg.res_blocks + 1; ++r) {
            // skip concat partner: last block of the level joins the
            // pre-level activation (base width for level 0 and so on)
            int skip_ch;
            if (r < cfg.res_blocks)
                skip_ch = cout;
            else
                skip_ch = i == 0 ? cfg.base : cfg.base * cfg.mults[i - 1];
            dec_res.emplace_back();
            init_res(dec_res.back(), ch + skip_ch, cout, rng);
            ch = cout;
            if (attn_here) {
                dec_attn_idx.push_back(static_cast<int>(dec_res.size()) - 1);
                dec_attn.emplace_back();
                dec_attn.back().init(ch, rng);
            }
        }
        if (i > 0) {
            up.emplace_back();
            up.back().init(ch, cfg.base * cfg.mults[i - 1], 3, rng);
            ch = cfg.base * cfg.mults[i - 1];
        }
    }
    out_norm.init(ch, norm_groups(ch));
    out_conv.init_zero(ch, 3, 3);
}

Val UNet::forward(Graph& g, Val x, const std::vector<int>& ts, Val mask) const {
    UNet* self = const_cast<UNet*>(this);
    const Tensor& xt = g.val(x);
    if (xt.ndim() != 4 || xt.dim(1) != cfg.in_channels)
        throw std::invalid_argument("UNet: bad input shape " + xt.shape_str());
    if (static_cast<int>(ts.size()) != xt.dim(0))
        throw std::invalid_argument("UNet: timestep batch mismatch");
    const int L = cfg.levels();

    Val temb = g.leaf(nn::sinusoidal_embedding(ts, cfg.base));
    temb = self->temb2(g, o::silu(self->temb1(g, temb)));

    Val h = self->in_conv(g, x);
    std::vector<Val> skips{h};
    size_t eri = 0, eai = 0, dni = 0;
    for (int i = 0; i < L; ++i) {
        for (int r = 0; r < cfg.res_blocks; ++r) {
            h = res_forward(g, enc_res[eri], h, temb);
            if (eai < enc_attn_idx.size() && enc_attn_idx[eai] == static_cast<int>(eri)) {
                h = const_cast<nn::SelfAttention2d&>(enc_attn[eai])(g, h);
                ++eai;
            }
            ++eri;
            skips.push_back(h);
        }
        if (i + 1 < L) {
            h = const_cast<nn::Conv2d&>(down[dni++])(g, o::avg_pool(h, 2, 2));
            skips.push_back(h);
        }
    }

    // mask pooled to bottleneck resolution for the gating branch
    Val mask_small = mask;
    for (int i = 0; i + 1 < L; ++i) mask_small = o::avg_pool(mask_small, 2, 2);

    h = res_forward(g, mid1, h, temb);
    for (const auto& blk : gdb) {
        auto* b = const_cast<GatedDilatedBlock*>(&blk);
        Val feat = o::silu(b->feat(g, h));
        if (cfg.gated_bottleneck) {
            Val gate = o::sigmoid(b->gate(g, o::concat_ch({h, mask_small})));
            h = o::add(h, o::mul(gate, feat));
        } else {
            h = o::add(h, feat);
        }
    }
    h = const_cast<nn::SelfAttention2d&>(mid_attn)(g, h);
    h = res_forward(g, mid2, h, temb);

    size_t dri = 0, dai = 0, upi = 0;
    for (int i = L - 1; i >= 0; --i) {
        for (int r = 0; r < cfg.res_blocks + 1; ++r) {
            h = o::concat_ch({h, skips.back()});
            skips.pop_back();
            h = res_forward(g, dec_res[dri], h, temb);
            if (dai < dec_attn_idx.size() && dec_attn_idx[dai] == static_cast<int>(dri)) {
                h = const_cast<nn::SelfAttention2d&>(dec_attn[dai])(g, h);
                ++dai;
            }
            ++dri;
        }
        if (i > 0) h = const_cast<nn::Conv2d&>(up[upi++])(g, o::upsample_nearest2(h));
    }
    if (!skips.empty()) throw std::logic_error("UNet: skip bookkeeping mismatch");
    return self->out_conv(g, o::silu(self->out_norm(g, h)));
}

namespace {

void collect_res(UNet::ResBlock& rb, nn::ParamMap& m, const std::string& p) {
    rb.n1.collect(m, p + ".n1");
    rb.conv1.collect(m, p + ".c1");
    rb.n2.collect(m, p + ".n2");
    rb.conv2.collect(m, p + ".c2");
    rb.temb.collect(m, p + ".temb");
    if (rb.has_skip) rb.skip.collect(m, p + ".skip");
}

}  // namespace

void UNet::collect(nn::ParamMap& m, const std::string& prefix) const {
    UNet* self = const_cast<UNet*>(this);
    self->temb1.collect(m, prefix + ".temb1");
    self->temb2.collect(m, prefix + ".temb2");
    self->in_conv.collect(m, prefix + ".in");
    for (size_t i = 0; i < enc_res.size(); ++i)
        collect_res(self->enc_res[i], m, prefix + ".enc" + std::to_string(i));
    for (size_t i = 0; i < enc_attn.size(); ++i)
        self->enc_attn[i].collect(m, prefix + ".enc_attn" + std::to_string(i));
    for (size_t i = 0; i < down.size(); ++i)
        self->down[i].collect(m, prefix + ".down" + std::to_string(i));
    collect_res(self->mid1, m, prefix + ".mid1");
    for (size_t i = 0; i < gdb.size(); ++i) {
        self->gdb[i].feat.collect(m, prefix + ".gdb" + std::to_string(i) + ".feat");
        self->gdb[i].gate.collect(m, prefix + ".gdb" + std::to_string(i) + ".gate");
    }
    self->mid_attn.collect(m, prefix + ".mid_attn");
    collect_res(self->mid2, m, prefix + ".mid2");
    for (size_t i = 0; i < dec_res.size(); ++i)
        collect_res(self->dec_res[i], m, prefix + ".dec" + std::to_string(i));
    for (size_t i = 0; i < dec_attn.size(); ++i)
        self->dec_attn[i].collect(m, prefix + ".dec_attn" + std::to_string(i));
    for (size_t i = 0; i < up.size(); ++i)
        self->up[i].collect(m, prefix + ".up" + std::to_string(i));
    self->out_norm.collect(m, prefix + ".out_norm");
    self->out_conv.collect(m, prefix + ".out");
}

int64_t UNet::parameter_count() const {
    nn::ParamMap m;
    collect(m);
    return nn::param_count(m);
}

}  // namespace textsr::model
