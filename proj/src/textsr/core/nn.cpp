#include "textsr/core/nn.hpp"

#include <cmath>
#include <numeric>

namespace textsr::nn {

using namespace ops;

namespace {

void uniform_init(Tensor& t, Rng& rng, real bound) { rng.fill_uniform(t, -bound, bound); }

}  // namespace

// -------------------------------------------------------------------- Conv2d

void Conv2d::init(int ci, int co, int k, Rng& rng, int stride_, int pad_, int dil_, bool bias) {
    stride = stride_;
    pad = pad_ < 0 ? (k / 2) * dil_ : pad_;
    dil = dil_;
    has_bias = bias;
    w.value = Tensor({co, ci, k, k});
    const real bound = 1.0 / std::sqrt(static_cast<real>(ci) * k * k);
    uniform_init(w.value, rng, bound);
    if (has_bias) {
        b.value = Tensor({co});
        uniform_init(b.value, rng, bound);
    }
}

void Conv2d::init_zero(int ci, int co, int k, int stride_, int pad_, int dil_) {
    stride = stride_;
    pad = pad_ < 0 ? (k / 2) * dil_ : pad_;
    dil = dil_;
    has_bias = true;
    w.value = Tensor({co, ci, k, k}, 0.0);
    b.value = Tensor({co}, 0.0);
}

Val Conv2d::operator()(Graph& g, Val x) {
    Val bv = has_bias ? g.param(b) : Val{};
    return conv2d(x, g.param(w), bv, stride, pad, dil);
}

void Conv2d::collect(ParamMap& m, const std::string& prefix) {
    m[prefix + ".w"] = &w;
    if (has_bias) m[prefix + ".b"] = &b;
}

void Conv2d::set_trainable(bool t) {
    w.trainable = t;
    b.trainable = t;
}

// -------------------------------------------------------------------- Linear

void Linear::init(int in, int out, Rng& rng, bool bias) {
    has_bias = bias;
    w.value = Tensor({in, out});
    const real bound = 1.0 / std::sqrt(static_cast<real>(in));
    uniform_init(w.value, rng, bound);
    if (has_bias) {
        b.value = Tensor({out});
        uniform_init(b.value, rng, bound);
    }
}

void Linear::init_zero(int in, int out, bool bias) {
    has_bias = bias;
    w.value = Tensor({in, out}, 0.0);
    if (has_bias) b.value = Tensor({out}, 0.0);
}

Val Linear::operator()(Graph& g, Val x) {
    return linear(x, g.param(w), has_bias ? g.param(b) : Val{});
}

void Linear::collect(ParamMap& m, const std::string& prefix) {
    m[prefix + ".w"] = &w;
    if (has_bias) m[prefix + ".b"] = &b;
}

void Linear::set_trainable(bool t) {
    w.trainable = t;
    b.trainable = t;
}

// ------------------------------------------------------------------ GroupNorm

void GroupNorm::init(int channels, int groups_) {
    groups = groups_;
    if (channels % groups) throw std::invalid_argument("GroupNorm: channels % groups != 0");
    gamma.value = Tensor({channels}, 1.0);
    beta.value = Tensor({channels}, 0.0);
}

Val GroupNorm::operator()(Graph& g, Val x) {
    return group_norm(x, groups, g.param(gamma), g.param(beta), eps);
}

void GroupNorm::collect(ParamMap& m, const std::string& prefix) {
    m[prefix + ".gamma"] = &gamma;
    m[prefix + ".beta"] = &beta;
}

void GroupNorm::set_trainable(bool t) {
    gamma.trainable = t;
    beta.trainable = t;
}

// ----------------------------------------------------------------------- GRU

void GRU::init(int input, int hidden_, Rng& rng) {
    hidden = hidden_;
    wx.init(input, 3 * hidden, rng);
    whr.init(hidden, hidden, rng, /*bias=*/false);
    whz.init(hidden, hidden, rng, /*bias=*/false);
    whn.init(hidden, hidden, rng, /*bias=*/true);
}

Val GRU::run(Graph& g, Val seq, bool reverse) const {
    GRU* self = const_cast<GRU*>(this);
    // copy dims up front: node insertion invalidates references into the tape
    if (g.val(seq).ndim() != 3) throw std::invalid_argument("GRU: expects (T,B,C)");
    const int t_len = g.val(seq).dim(0);
    const int b = g.val(seq).dim(1);
    const int c = g.val(seq).dim(2);
    const int hd = hidden;

    // input projection for every timestep in one pass
    Val gx = self->wx(g, reshape(seq, {t_len * b, c}));  // (T*B, 3H)
    Val gxr = reshape(slice_cols(gx, 0, hd), {t_len, b, hd});
    Val gxz = reshape(slice_cols(gx, hd, hd), {t_len, b, hd});
    Val gxn = reshape(slice_cols(gx, 2 * hd, hd), {t_len, b, hd});

    Val h = g.leaf(Tensor({b, hd}, 0.0));
    std::vector<Val> outs(t_len);
    for (int i = 0; i < t_len; ++i) {
        const int t = reverse ? t_len - 1 - i : i;
        Val xr = reshape(slice0(gxr, t, 1), {b, hd});
        Val xz = reshape(slice0(gxz, t, 1), {b, hd});
        Val xn = reshape(slice0(gxn, t, 1), {b, hd});
        Val r = sigmoid(add(xr, self->whr(g, h)));
        Val z = sigmoid(add(xz, self->whz(g, h)));
        Val n = tanh_(add(xn, mul(r, self->whn(g, h))));
        // h' = (1 - z) * n + z * h  ==  n + z * (h - n)
        h = add(n, mul(z, sub(h, n)));
        outs[t] = reshape(h, {1, b, hd});
    }
    return concat0(outs);
}

void GRU::collect(ParamMap& m, const std::string& prefix) {
    wx.collect(m, prefix + ".wx");
    whr.collect(m, prefix + ".whr");
    whz.collect(m, prefix + ".whz");
    whn.collect(m, prefix + ".whn");
}

void GRU::set_trainable(bool t) {
    wx.set_trainable(t);
    whr.set_trainable(t);
    whz.set_trainable(t);
    whn.set_trainable(t);
}

// --------------------------------------------------------------------- BiGRU

void BiGRU::init(int input, int hidden, Rng& rng) {
    fwd.init(input, hidden, rng);
    bwd.init(input, hidden, rng);
}

Val BiGRU::run(Graph& g, Val seq) const {
    const int t_len = g.val(seq).dim(0);
    const int b = g.val(seq).dim(1);
    Val of = fwd.run(g, seq, false);
    Val ob = bwd.run(g, seq, true);
    Val flat = concat_cols({reshape(of, {t_len * b, fwd.hidden}),
                            reshape(ob, {t_len * b, bwd.hidden})});
    return reshape(flat, {t_len, b, fwd.hidden + bwd.hidden});
}

void BiGRU::collect(ParamMap& m, const std::string& prefix) {
    fwd.collect(m, prefix + ".f");
    bwd.collect(m, prefix + ".b");
}

void BiGRU::set_trainable(bool t) {
    fwd.set_trainable(t);
    bwd.set_trainable(t);
}

// ----------------------------------------------------------- SelfAttention2d

void SelfAttention2d::init(int channels_, Rng& rng) {
    channels = channels_;
    norm.init(channels, std::gcd(channels, 8));
    q.init(channels, channels, rng);
    k.init(channels, channels, rng);
    v.init(channels, channels, rng);
    proj.init_zero(channels, channels);  // residual branch starts as identity
}

Val SelfAttention2d::operator()(Graph& g, Val x) {
    const Tensor& xt = g.val(x);
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    const int hw = h * w;
    Val hnorm = norm(g, x);
    Val seq = permute(reshape(hnorm, {n, c, hw}), {0, 2, 1});  // (N, HW, C)
    Val flat = reshape(seq, {n * hw, c});
    Val qs = reshape(q(g, flat), {n, hw, c});
    Val ks = reshape(k(g, flat), {n, hw, c});
    Val vs = reshape(v(g, flat), {n, hw, c});
    Val scores = scale(bmm(qs, ks, /*tb=*/true), 1.0 / std::sqrt(static_cast<real>(c)));
    Val attn = softmax_last(scores);
    Val ctx = reshape(bmm(attn, vs), {n * hw, c});
    Val out = reshape(proj(g, ctx), {n, hw, c});
    Val back = reshape(permute(out, {0, 2, 1}), {n, c, h, w});
    return add(x, back);
}

void SelfAttention2d::collect(ParamMap& m, const std::string& prefix) {
    norm.collect(m, prefix + ".norm");
    q.collect(m, prefix + ".q");
    k.collect(m, prefix + ".k");
    v.collect(m, prefix + ".v");
    proj.collect(m, prefix + ".proj");
}

// --------------------------------------------------------- CrossAttentionSeq

void CrossAttentionSeq::init(int channels_, int ctx_dim, Rng& rng) {
    channels = channels_;
    q.init(channels, channels, rng);
    k.init(ctx_dim, channels, rng);
    v.init(ctx_dim, channels, rng);
    proj.init_zero(channels, channels);
}

Val CrossAttentionSeq::operator()(Graph& g, Val queries, Val context) {
    const Tensor& qt = g.val(queries);
    const Tensor& ct = g.val(context);
    if (qt.ndim() != 3 || ct.ndim() != 3 || qt.dim(0) != ct.dim(0))
        throw std::invalid_argument("CrossAttentionSeq: wants (N,W,C) and (N,L,Ck)");
    const int n = qt.dim(0), wlen = qt.dim(1);
    const int llen = ct.dim(1), ck = ct.dim(2);
    Val qs = reshape(q(g, reshape(queries, {n * wlen, qt.dim(2)})), {n, wlen, channels});
    Val kf = reshape(context, {n * llen, ck});
    Val ks = reshape(k(g, kf), {n, llen, channels});
    Val vs = reshape(v(g, kf), {n, llen, channels});
    Val scores = scale(bmm(qs, ks, /*tb=*/true), 1.0 / std::sqrt(static_cast<real>(channels)));
    Val attn = softmax_last(scores);  // (N, W, L)
    Val ctx = reshape(bmm(attn, vs), {n * wlen, channels});
    return reshape(proj(g, ctx), {n, wlen, channels});
}

void CrossAttentionSeq::collect(ParamMap& m, const std::string& prefix) {
    q.collect(m, prefix + ".q");
    k.collect(m, prefix + ".k");
    v.collect(m, prefix + ".v");
    proj.collect(m, prefix + ".proj");
}

// ------------------------------------------------------------------ utilities

Tensor sinusoidal_embedding(const std::vector<int>& t, int dim) {
    if (dim % 2) throw std::invalid_argument("sinusoidal_embedding: dim must be even");
    const int half = dim / 2;
    Tensor out({static_cast<int>(t.size()), dim});
    for (size_t n = 0; n < t.size(); ++n)
        for (int i = 0; i < half; ++i) {
            const real freq = std::exp(-std::log(10000.0) * i / (half > 1 ? half - 1 : 1));
            out.data()[n * dim + i] = std::sin(t[n] * freq);
            out.data()[n * dim + half + i] = std::cos(t[n] * freq);
        }
    return out;
}

int64_t param_count(const ParamMap& m) {
    int64_t n = 0;
    for (const auto& [name, p] : m) n += p->value.numel();
    return n;
}

uint64_t param_checksum(const ParamMap& m) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const unsigned char* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, p] : m) {
        mix(reinterpret_cast<const unsigned char*>(name.data()), name.size());
        mix(reinterpret_cast<const unsigned char*>(p->value.data()),
            sizeof(real) * p->value.numel());
    }
    return h;
}

}  // namespace textsr::nn
