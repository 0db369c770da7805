#include "textsr/model/tem.hpp"

namespace textsr::model {

namespace o = textsr::ops;

void Tem::init(const TemConfig& config, const text::Recognizer* rec, Rng& rng) {
    cfg = config;
    recognizer = rec;
    if (!recognizer) throw std::invalid_argument("Tem: recognizer required");
    const int c = cfg.channels;
    stem.init(3, c, 3, rng);
    const int feat = 2 * recognizer->cfg.gru_hidden;
    const int ncls = recognizer->charset.num_classes();
    prior_adapter.init_zero(feat, ncls);
    fuse.init(c, ncls, rng);
    blocks.resize(cfg.blocks);
    for (auto& b : blocks) {
        b.conv1.init(c, c, 3, rng);
        b.gru.init(c, c, rng);
        b.gru_proj.init(2 * c, c, 1, rng);
        b.wav1.init(4 * c, 2 * c, 3, rng);
        b.wav2.init(2 * c, 4 * c, 3, rng);
    }
    out_conv.init(c, 3, 3, rng);

    const int mc = cfg.mask_channels;
    m1.init(3, mc, 3, rng);
    m2.init(mc, mc, 3, rng);
    m3.init(mc, mc, 3, rng);
    m4.init(mc, mc, 3, rng);
    m_head.init(mc, 1, 3, rng);
}

Tem::Output Tem::forward(Graph& g, Val lr_up) const {
    Tem* self = const_cast<Tem*>(this);
    const int n = g.val(lr_up).dim(0);
    const int h = g.val(lr_up).dim(2);
    const int w = g.val(lr_up).dim(3);
    if (g.val(lr_up).dim(1) != 3)
        throw std::invalid_argument("Tem: expects (N,3,H,W) upsampled input");

    // semantic block: frozen prior generator + trainable adapter
    Val enc = recognizer->encode_seq(g, lr_up);            // (L,N,F), frozen weights
    Val base_logits = recognizer->apply_head(g, enc);      // (L,N,cls)
    const int L = g.val(enc).dim(0);
    const int F = g.val(enc).dim(2);
    const int ncls = recognizer->charset.num_classes();
    Val adapt = o::reshape(self->prior_adapter(g, o::reshape(enc, {L * n, F})), {L, n, ncls});
    Val prior_logits = o::add(base_logits, adapt);
    Val prior_ctx = o::permute(o::softmax_last(prior_logits), {1, 0, 2});  // (N,L,cls)

    Val f = o::relu(self->stem(g, lr_up));
    Val ctx = self->fuse(g, o::mean_h(f), prior_ctx);      // (N,W,C)
    f = o::add(f, o::broadcast_h(ctx, h));

    const int c = cfg.channels;
    for (const auto& blk : blocks) {
        auto* b = const_cast<WaveletBlock*>(&blk);
        // spatial path: conv then width recurrence over feature columns
        Val s = o::relu(b->conv1(g, f));
        Val seq = o::reshape(o::permute(s, {3, 0, 2, 1}), {w, n * h, c});  // (W, N*H, C)
        Val r = b->gru.run(g, seq);                                        // (W, N*H, 2C)
        Val r4 = o::permute(o::reshape(r, {w, n, h, 2 * c}), {1, 3, 2, 0});
        Val sp = b->gru_proj(g, r4);
        // frequency path: conv stack over Haar subbands
        Val wv = o::haar_dwt(f);
        wv = b->wav2(g, o::relu(b->wav1(g, wv)));
        Val fq = o::haar_idwt(wv);
        f = o::add(f, o::add(sp, fq));
    }
    Output out;
    out.x_sr = o::tanh_(self->out_conv(g, f));
    out.prior_logits = prior_logits;

    out.x_m = mask_forward(g, lr_up);
    return out;
}

Val Tem::mask_forward(Graph& g, Val img) const {
    Tem* self = const_cast<Tem*>(this);
    Val m = o::relu(self->m1(g, img));
    m = o::relu(self->m2(g, m));
    m = o::relu(self->m3(g, m));
    m = o::relu(self->m4(g, m));
    return o::sigmoid(self->m_head(g, m));
}

void Tem::collect(nn::ParamMap& m, const std::string& prefix) const {
    Tem* self = const_cast<Tem*>(this);
    self->stem.collect(m, prefix + ".stem");
    self->prior_adapter.collect(m, prefix + ".adapter");
    self->fuse.collect(m, prefix + ".fuse");
    for (size_t i = 0; i < blocks.size(); ++i) {
        auto* b = const_cast<WaveletBlock*>(&blocks[i]);
        const std::string p = prefix + ".blk" + std::to_string(i);
        b->conv1.collect(m, p + ".conv1");
        b->gru.collect(m, p + ".gru");
        b->gru_proj.collect(m, p + ".gru_proj");
        b->wav1.collect(m, p + ".wav1");
        b->wav2.collect(m, p + ".wav2");
    }
    self->out_conv.collect(m, prefix + ".out");
    self->m1.collect(m, prefix + ".m1");
    self->m2.collect(m, prefix + ".m2");
    self->m3.collect(m, prefix + ".m3");
    self->m4.collect(m, prefix + ".m4");
    self->m_head.collect(m, prefix + ".m_head");
}

}  // namespace textsr::model
