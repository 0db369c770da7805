#include "textsr/core/ops.hpp"

#include <algorithm>
#include <cmath>

#include "textsr/core/kernels.hpp"
#include "textsr/core/rng.hpp"

namespace textsr::ops {

namespace {

Graph& gr(Val v) {
    if (!v.ok()) throw std::invalid_argument("ops: empty value handle");
    return *v.g;
}

Tensor& tv(Val v) { return v.g->val(v); }

// Tiny tensors stay on plain loops: entering the OpenMP runtime per call
// costs more than the work itself on the recurrence paths.
template <class F>
Tensor map1(const Tensor& a, F f) {
    Tensor out(a.shape());
    const real* pa = a.data();
    real* po = out.data();
    const int64_t n = a.numel();
    if (n > 32768) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
    }
    return out;
}

template <class F>
Tensor map2(const Tensor& a, const Tensor& b, F f) {
    check_same_shape(a, b, "ops.elementwise");
    Tensor out(a.shape());
    const real* pa = a.data();
    const real* pb = b.data();
    real* po = out.data();
    const int64_t n = a.numel();
    if (n > 32768) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    }
    return out;
}

// gy * f(x, y) for a unary op's input grad
template <class F>
Tensor chain1(Graph& g, int self, int parent, F f) {
    const Tensor& gy = g.grad(self);
    const Tensor& y = g.val(self);
    const Tensor& x = g.val(parent);
    Tensor out(x.shape());
    const real* pg = gy.data();
    const real* py = y.data();
    const real* px = x.data();
    real* po = out.data();
    const int64_t n = x.numel();
    if (n > 32768) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) po[i] = pg[i] * f(px[i], py[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) po[i] = pg[i] * f(px[i], py[i]);
    }
    return out;
}

template <class F, class DF>
Val unary_op(Val a, F f, DF dfdx) {
    Graph& g = gr(a);
    Tensor out = map1(tv(a), f);
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia, dfdx](Graph& gg) {
        gg.accumulate_grad(ia, chain1(gg, self, ia, dfdx));
    });
    return Val{&g, id};
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Val add(Val a, Val b) {
    Graph& g = gr(a);
    Tensor out = map2(tv(a), tv(b), [](real x, real y) { return x + y; });
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib](Graph& gg) {
        Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ia)) gg.accumulate_grad(ia, gy);
        if (gg.needs_grad(ib)) gg.accumulate_grad(ib, gy, /*may_steal=*/false);
    });
    return Val{&g, id};
}

Val sub(Val a, Val b) {
    Graph& g = gr(a);
    Tensor out = map2(tv(a), tv(b), [](real x, real y) { return x - y; });
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib](Graph& gg) {
        Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ia)) gg.accumulate_grad(ia, gy, /*may_steal=*/false);
        if (gg.needs_grad(ib))
            gg.accumulate_grad(ib, map1(gy, [](real v) { return -v; }));
    });
    return Val{&g, id};
}

Val mul(Val a, Val b) {
    Graph& g = gr(a);
    Tensor out = map2(tv(a), tv(b), [](real x, real y) { return x * y; });
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ia))
            gg.accumulate_grad(ia, map2(gy, gg.val(ib), [](real gv, real bv) { return gv * bv; }));
        if (gg.needs_grad(ib))
            gg.accumulate_grad(ib, map2(gy, gg.val(ia), [](real gv, real av) { return gv * av; }));
    });
    return Val{&g, id};
}

Val div(Val a, Val b) {
    Graph& g = gr(a);
    Tensor out = map2(tv(a), tv(b), [](real x, real y) { return x / y; });
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        const Tensor& bv = gg.val(ib);
        if (gg.needs_grad(ia))
            gg.accumulate_grad(ia, map2(gy, bv, [](real gv, real y) { return gv / y; }));
        if (gg.needs_grad(ib)) {
            const Tensor& av = gg.val(ia);
            Tensor gb(bv.shape());
            const int64_t n = bv.numel();
            const real* pg = gy.data();
            const real* pa = av.data();
            const real* pb = bv.data();
            real* po = gb.data();
            for (int64_t i = 0; i < n; ++i) po[i] = -pg[i] * pa[i] / (pb[i] * pb[i]);
            gg.accumulate_grad(ib, std::move(gb));
        }
    });
    return Val{&g, id};
}

Val scale(Val a, real s) {
    return unary_op(a, [s](real x) { return s * x; },
                    [s](real, real) { return s; });
}

Val add_const(Val a, real c) {
    return unary_op(a, [c](real x) { return x + c; },
                    [](real, real) { return 1.0; });
}

Val relu(Val a) {
    return unary_op(a, [](real x) { return x > 0 ? x : 0.0; },
                    [](real x, real) { return x > 0 ? 1.0 : 0.0; });
}

Val lrelu(Val a, real slope) {
    return unary_op(a, [slope](real x) { return x > 0 ? x : slope * x; },
                    [slope](real x, real) { return x > 0 ? 1.0 : slope; });
}

Val silu(Val a) {
    return unary_op(a, [](real x) { return x / (1.0 + std::exp(-x)); },
                    [](real x, real) {
                        const real s = 1.0 / (1.0 + std::exp(-x));
                        return s * (1.0 + x * (1.0 - s));
                    });
}

Val sigmoid(Val a) {
    return unary_op(a, [](real x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](real, real y) { return y * (1.0 - y); });
}

Val tanh_(Val a) {
    return unary_op(a, [](real x) { return std::tanh(x); },
                    [](real, real y) { return 1.0 - y * y; });
}

Val abs_(Val a) {
    return unary_op(a, [](real x) { return std::fabs(x); },
                    [](real x, real) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Val square(Val a) {
    return unary_op(a, [](real x) { return x * x; },
                    [](real x, real) { return 2.0 * x; });
}

Val sqrt_(Val a) {
    return unary_op(a, [](real x) { return std::sqrt(x); },
                    [](real, real y) { return 0.5 / y; });
}

// ----------------------------------------------------------------- reductions

Val sum_all(Val a) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    Tensor out = Tensor::scalar(kern::reduce_sum(x.data(), x.numel()));
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia](Graph& gg) {
        const real gv = gg.grad(self)[0];
        Tensor gx(gg.val(ia).shape(), gv);
        gg.accumulate_grad(ia, std::move(gx));
    });
    return Val{&g, id};
}

Val mean_all(Val a) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    const real inv = 1.0 / static_cast<real>(x.numel());
    Tensor out = Tensor::scalar(kern::reduce_sum(x.data(), x.numel()) * inv);
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia, inv](Graph& gg) {
        const real gv = gg.grad(self)[0] * inv;
        Tensor gx(gg.val(ia).shape(), gv);
        gg.accumulate_grad(ia, std::move(gx));
    });
    return Val{&g, id};
}

// -------------------------------------------------------------------- shaping

Val reshape(Val a, std::vector<int> shape) {
    Graph& g = gr(a);
    Tensor out = tv(a).reshaped(shape);  // aliases
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia](Graph& gg) {
        gg.accumulate_grad(ia, gg.grad(self));
    });
    return Val{&g, id};
}

Val slice0(Val a, int start, int len) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    Tensor out = x.slice0(start, len);  // aliases
    const int self = g.size();
    const int ia = a.id;
    const int64_t stride = x.numel() / x.dim(0);
    int id = g.add_node(std::move(out), {ia}, [self, ia, start, stride](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor& gx = gg.ensure_grad(ia);
        axpy(gx.data() + start * stride, gy.data(), gy.numel());
    });
    return Val{&g, id};
}

Val concat0(const std::vector<Val>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat0: no parts");
    Graph& g = gr(parts[0]);
    std::vector<int> shape = tv(parts[0]).shape();
    int64_t rows = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        for (size_t i = 1; i < shape.size(); ++i)
            if (t.dim(static_cast<int>(i)) != shape[i])
                throw std::invalid_argument("concat0: trailing dims differ");
        rows += t.dim(0);
    }
    shape[0] = static_cast<int>(rows);
    Tensor out(shape);
    std::vector<int> pids;
    std::vector<int> lens;
    int64_t off = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        std::copy(t.data(), t.data() + t.numel(), out.data() + off);
        off += t.numel();
        pids.push_back(p.id);
        lens.push_back(t.dim(0));
    }
    const int self = g.size();
    int id = g.add_node(std::move(out), pids, [self, pids, lens](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        int start = 0;
        for (size_t i = 0; i < pids.size(); ++i) {
            if (gg.needs_grad(pids[i]))
                gg.accumulate_grad(pids[i], gy.slice0(start, lens[i]), /*may_steal=*/false);
            start += lens[i];
        }
    });
    return Val{&g, id};
}

Val concat_cols(const std::vector<Val>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    Graph& g = gr(parts[0]);
    const int m = tv(parts[0]).dim(0);
    int ntotal = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        if (t.ndim() != 2 || t.dim(0) != m)
            throw std::invalid_argument("concat_cols: incompatible shapes");
        ntotal += t.dim(1);
    }
    Tensor out({m, ntotal});
    std::vector<int> pids, widths;
    int off = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        const int w = t.dim(1);
        for (int i = 0; i < m; ++i)
            std::copy(t.data() + static_cast<int64_t>(i) * w,
                      t.data() + static_cast<int64_t>(i + 1) * w,
                      out.data() + static_cast<int64_t>(i) * ntotal + off);
        off += w;
        pids.push_back(p.id);
        widths.push_back(w);
    }
    const int self = g.size();
    int id = g.add_node(std::move(out), pids, [self, pids, widths, m, ntotal](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        int c0 = 0;
        for (size_t pi = 0; pi < pids.size(); ++pi) {
            if (gg.needs_grad(pids[pi])) {
                Tensor& gx = gg.ensure_grad(pids[pi]);
                const int w = widths[pi];
                for (int i = 0; i < m; ++i)
                    axpy(gx.data() + static_cast<int64_t>(i) * w,
                         gy.data() + static_cast<int64_t>(i) * ntotal + c0, w);
            }
            c0 += widths[pi];
        }
    });
    return Val{&g, id};
}

namespace {

// Copies channels [c0, c0+len) of src (N,C,H,W) into dst channel offset d0.
void copy_channels(const Tensor& src, int c0, int len, Tensor& dst, int d0) {
    const int n = src.dim(0), c = src.dim(1);
    const int64_t hw = src.numel() / (static_cast<int64_t>(n) * c);
    const int dc = dst.dim(1);
    for (int ni = 0; ni < n; ++ni)
        std::copy(src.data() + (static_cast<int64_t>(ni) * c + c0) * hw,
                  src.data() + (static_cast<int64_t>(ni) * c + c0 + len) * hw,
                  dst.data() + (static_cast<int64_t>(ni) * dc + d0) * hw);
}

void add_channels(const Tensor& src, int s0, int len, Tensor& dst, int d0) {
    const int n = src.dim(0), c = src.dim(1);
    const int64_t hw = src.numel() / (static_cast<int64_t>(n) * c);
    const int dc = dst.dim(1);
    for (int ni = 0; ni < n; ++ni)
        axpy(dst.data() + (static_cast<int64_t>(ni) * dc + d0) * hw,
             src.data() + (static_cast<int64_t>(ni) * c + s0) * hw,
             len * hw);
}

}  // namespace

Val concat_ch(const std::vector<Val>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_ch: no parts");
    Graph& g = gr(parts[0]);
    const Tensor& first = tv(parts[0]);
    if (first.ndim() != 4) throw std::invalid_argument("concat_ch: expects NCHW");
    int ctotal = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        if (t.ndim() != 4 || t.dim(0) != first.dim(0) || t.dim(2) != first.dim(2) ||
            t.dim(3) != first.dim(3))
            throw std::invalid_argument("concat_ch: incompatible shapes");
        ctotal += t.dim(1);
    }
    Tensor out({first.dim(0), ctotal, first.dim(2), first.dim(3)});
    std::vector<int> pids, chans;
    int off = 0;
    for (const Val& p : parts) {
        const Tensor& t = tv(p);
        copy_channels(t, 0, t.dim(1), out, off);
        off += t.dim(1);
        pids.push_back(p.id);
        chans.push_back(t.dim(1));
    }
    const int self = g.size();
    int id = g.add_node(std::move(out), pids, [self, pids, chans](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        int c0 = 0;
        for (size_t i = 0; i < pids.size(); ++i) {
            if (gg.needs_grad(pids[i])) {
                Tensor& gx = gg.ensure_grad(pids[i]);
                add_channels(gy, c0, chans[i], gx, 0);
            }
            c0 += chans[i];
        }
    });
    return Val{&g, id};
}

Val slice_ch(Val a, int c0, int len) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    if (x.ndim() != 4) throw std::invalid_argument("slice_ch: expects NCHW");
    if (c0 < 0 || len < 1 || c0 + len > x.dim(1))
        throw std::invalid_argument("slice_ch: bad channel range");
    Tensor out({x.dim(0), len, x.dim(2), x.dim(3)});
    copy_channels(x, c0, len, out, 0);
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia, c0, len](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor& gx = gg.ensure_grad(ia);
        add_channels(gy, 0, len, gx, c0);
    });
    return Val{&g, id};
}

Val slice_cols(Val a, int c0, int len) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    if (x.ndim() != 2) throw std::invalid_argument("slice_cols: expects (M,N)");
    const int m = x.dim(0), n = x.dim(1);
    if (c0 < 0 || len < 1 || c0 + len > n) throw std::invalid_argument("slice_cols: bad range");
    Tensor out({m, len});
    for (int i = 0; i < m; ++i)
        std::copy(x.data() + static_cast<int64_t>(i) * n + c0,
                  x.data() + static_cast<int64_t>(i) * n + c0 + len,
                  out.data() + static_cast<int64_t>(i) * len);
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia, c0, len, m, n](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor& gx = gg.ensure_grad(ia);
        for (int i = 0; i < m; ++i)
            axpy(gx.data() + static_cast<int64_t>(i) * n + c0,
                 gy.data() + static_cast<int64_t>(i) * len, len);
    });
    return Val{&g, id};
}

namespace {

Tensor permute_tensor(const Tensor& x, const std::vector<int>& axes) {
    const int nd = x.ndim();
    if (static_cast<int>(axes.size()) != nd)
        throw std::invalid_argument("permute: rank mismatch");
    std::vector<int> oshape(nd);
    for (int i = 0; i < nd; ++i) oshape[i] = x.dim(axes[i]);
    Tensor out(oshape);
    std::vector<int64_t> istride(nd, 1), ostride(nd, 1);
    for (int i = nd - 2; i >= 0; --i) istride[i] = istride[i + 1] * x.dim(i + 1);
    for (int i = nd - 2; i >= 0; --i) ostride[i] = ostride[i + 1] * oshape[i + 1];
    const int64_t n = x.numel();
    const real* px = x.data();
    real* po = out.data();
#pragma omp parallel for schedule(static) if (n > 65536)
    for (int64_t o = 0; o < n; ++o) {
        int64_t rem = o, src = 0;
        for (int i = 0; i < nd; ++i) {
            const int64_t idx = rem / ostride[i];
            rem -= idx * ostride[i];
            src += idx * istride[axes[i]];
        }
        po[o] = px[src];
    }
    return out;
}

std::vector<int> inverse_axes(const std::vector<int>& axes) {
    std::vector<int> inv(axes.size());
    for (size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = static_cast<int>(i);
    return inv;
}

}  // namespace

Val permute(Val a, const std::vector<int>& axes) {
    Graph& g = gr(a);
    Tensor out = permute_tensor(tv(a), axes);
    const int self = g.size();
    const int ia = a.id;
    const std::vector<int> inv = inverse_axes(axes);
    int id = g.add_node(std::move(out), {ia}, [self, ia, inv](Graph& gg) {
        gg.accumulate_grad(ia, permute_tensor(gg.grad(self), inv));
    });
    return Val{&g, id};
}

// ------------------------------------------------------------- linear algebra

Val matmul(Val a, Val b, bool tb) {
    Graph& g = gr(a);
    const Tensor& ta = tv(a);
    const Tensor& tbv = tv(b);
    if (ta.ndim() != 2 || tbv.ndim() != 2) throw std::invalid_argument("matmul: expects 2-D");
    const int m = ta.dim(0), k = ta.dim(1);
    const int n = tb ? tbv.dim(0) : tbv.dim(1);
    const int kb = tb ? tbv.dim(1) : tbv.dim(0);
    if (k != kb) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor out({m, n});
    kern::matmul(ta.data(), tbv.data(), out.data(), m, k, n, false, tb, false);
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib, m, k, n, tb](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ia)) {
            Tensor& ga = gg.ensure_grad(ia);
            // dA = G * B^T  (or G * B when b was stored transposed)
            kern::matmul(gy.data(), gg.val(ib).data(), ga.data(), m, n, k, false, !tb, true);
        }
        if (gg.needs_grad(ib)) {
            Tensor& gb = gg.ensure_grad(ib);
            if (!tb)  // dB = A^T * G  (k,n)
                kern::matmul(gg.val(ia).data(), gy.data(), gb.data(), k, m, n, true, false, true);
            else  // dB_stored = G^T * A  (n,k)
                kern::matmul(gy.data(), gg.val(ia).data(), gb.data(), n, m, k, true, false, true);
        }
    });
    return Val{&g, id};
}

Val bmm(Val a, Val b, bool tb) {
    Graph& g = gr(a);
    const Tensor& ta = tv(a);
    const Tensor& tbv = tv(b);
    if (ta.ndim() != 3 || tbv.ndim() != 3) throw std::invalid_argument("bmm: expects 3-D");
    const int bs = ta.dim(0);
    if (tbv.dim(0) != bs) throw std::invalid_argument("bmm: batch mismatch");
    const int m = ta.dim(1), k = ta.dim(2);
    const int n = tb ? tbv.dim(1) : tbv.dim(2);
    const int kb = tb ? tbv.dim(2) : tbv.dim(1);
    if (k != kb) throw std::invalid_argument("bmm: inner dim mismatch");
    Tensor out({bs, m, n});
    for (int i = 0; i < bs; ++i)
        kern::matmul(ta.data() + static_cast<int64_t>(i) * m * k,
                     tbv.data() + static_cast<int64_t>(i) * k * n,
                     out.data() + static_cast<int64_t>(i) * m * n, m, k, n, false, tb, false);
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib, bs, m, k, n, tb](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        const int64_t sg = static_cast<int64_t>(m) * n;
        const int64_t sa = static_cast<int64_t>(m) * k;
        const int64_t sb = static_cast<int64_t>(k) * n;
        if (gg.needs_grad(ia)) {
            Tensor& ga = gg.ensure_grad(ia);
            for (int i = 0; i < bs; ++i)
                kern::matmul(gy.data() + i * sg, gg.val(ib).data() + i * sb, ga.data() + i * sa,
                             m, n, k, false, !tb, true);
        }
        if (gg.needs_grad(ib)) {
            Tensor& gb = gg.ensure_grad(ib);
            for (int i = 0; i < bs; ++i) {
                if (!tb)
                    kern::matmul(gg.val(ia).data() + i * sa, gy.data() + i * sg,
                                 gb.data() + i * sb, k, m, n, true, false, true);
                else
                    kern::matmul(gy.data() + i * sg, gg.val(ia).data() + i * sa,
                                 gb.data() + i * sb, n, m, k, true, false, true);
            }
        }
    });
    return Val{&g, id};
}

Val softmax_last(Val a) {
    Graph& g = gr(a);
    const Tensor& x = tv(a);
    const int cols = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / cols;
    Tensor out(x.shape());
    const real* px = x.data();
    real* po = out.data();
#pragma omp parallel for schedule(static) if (rows > 16)
    for (int64_t r = 0; r < rows; ++r) {
        const real* xr = px + r * cols;
        real* yr = po + r * cols;
        real mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        real s = 0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        const real inv = 1.0 / s;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
    const int self = g.size();
    const int ia = a.id;
    int id = g.add_node(std::move(out), {ia}, [self, ia, rows, cols](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        const Tensor& y = gg.val(self);
        Tensor gx(y.shape());
        const real* pg = gy.data();
        const real* py = y.data();
        real* po2 = gx.data();
#pragma omp parallel for schedule(static) if (rows > 16)
        for (int64_t r = 0; r < rows; ++r) {
            const real* grow = pg + r * cols;
            const real* yrow = py + r * cols;
            real dot = 0;
            for (int j = 0; j < cols; ++j) dot += grow[j] * yrow[j];
            real* orow = po2 + r * cols;
            for (int j = 0; j < cols; ++j) orow[j] = yrow[j] * (grow[j] - dot);
        }
        gg.accumulate_grad(ia, std::move(gx));
    });
    return Val{&g, id};
}

// ----------------------------------------------------------------- network ops

Val conv2d(Val x, Val w, Val b, int stride, int pad, int dil) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    const Tensor& wt = tv(w);
    if (xt.ndim() != 4 || wt.ndim() != 4) throw std::invalid_argument("conv2d: expects NCHW");
    if (xt.dim(1) != wt.dim(1))
        throw std::invalid_argument("conv2d: channel mismatch " + xt.shape_str() + " vs " +
                                    wt.shape_str());
    kern::ConvDims d;
    d.n = xt.dim(0);
    d.ci = xt.dim(1);
    d.h = xt.dim(2);
    d.w = xt.dim(3);
    d.co = wt.dim(0);
    d.kh = wt.dim(2);
    d.kw = wt.dim(3);
    d.stride = stride;
    d.pad = pad;
    d.dil = dil;
    const bool has_bias = b.ok();
    if (has_bias && (tv(b).ndim() != 1 || tv(b).dim(0) != d.co))
        throw std::invalid_argument("conv2d: bad bias shape");
    Tensor out({d.n, d.co, d.ho(), d.wo()});
    kern::conv2d_fwd(xt.data(), wt.data(), has_bias ? tv(b).data() : nullptr, out.data(), d);
    const int self = g.size();
    const int ix = x.id, iw = w.id, ib = has_bias ? b.id : -1;
    std::vector<int> parents = {ix, iw};
    if (has_bias) parents.push_back(ib);
    int id = g.add_node(std::move(out), parents, [self, ix, iw, ib, d](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ix)) {
            Tensor gx({d.n, d.ci, d.h, d.w});
            kern::conv2d_bwd_input(gy.data(), gg.val(iw).data(), gx.data(), d);
            gg.accumulate_grad(ix, std::move(gx));
        }
        const bool need_w = gg.needs_grad(iw);
        const bool need_b = ib >= 0 && gg.needs_grad(ib);
        if (need_w || need_b) {
            Tensor gw({d.co, d.ci, d.kh, d.kw});
            Tensor gb({d.co});
            kern::conv2d_bwd_weight(gy.data(), gg.val(ix).data(), gw.data(),
                                    need_b ? gb.data() : nullptr, d);
            if (need_w) gg.accumulate_grad(iw, std::move(gw));
            if (need_b) gg.accumulate_grad(ib, std::move(gb));
        }
    });
    return Val{&g, id};
}

Val add_rowvec(Val a, Val b) {
    Graph& g = gr(a);
    const Tensor& at = tv(a);
    const Tensor& bt = tv(b);
    if (at.ndim() != 2 || bt.ndim() != 1 || bt.dim(0) != at.dim(1))
        throw std::invalid_argument("add_rowvec: wants (M,N) + (N)");
    const int m = at.dim(0), n = at.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.data()[static_cast<int64_t>(i) * n + j] =
                at.data()[static_cast<int64_t>(i) * n + j] + bt.data()[j];
    const int self = g.size();
    const int ia = a.id, ib = b.id;
    int id = g.add_node(std::move(out), {ia, ib}, [self, ia, ib, m, n](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ia)) gg.accumulate_grad(ia, gy, /*may_steal=*/false);
        if (gg.needs_grad(ib)) {
            Tensor gb({n}, 0.0);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gb[j] += gy.data()[static_cast<int64_t>(i) * n + j];
            gg.accumulate_grad(ib, std::move(gb));
        }
    });
    return Val{&g, id};
}

Val add_nc(Val x, Val e) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    const Tensor& et = tv(e);
    if (xt.ndim() != 4 || et.ndim() != 2 || et.dim(0) != xt.dim(0) || et.dim(1) != xt.dim(1))
        throw std::invalid_argument("add_nc: wants (N,C,H,W) + (N,C)");
    const int n = xt.dim(0), c = xt.dim(1);
    const int64_t hw = static_cast<int64_t>(xt.dim(2)) * xt.dim(3);
    Tensor out(xt.shape());
#pragma omp parallel for collapse(2) schedule(static)
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const real ev = et.data()[static_cast<int64_t>(ni) * c + ci];
            const real* px = xt.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            real* po = out.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) po[i] = px[i] + ev;
        }
    const int self = g.size();
    const int ix = x.id, ie = e.id;
    int id = g.add_node(std::move(out), {ix, ie}, [self, ix, ie, n, c, hw](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        if (gg.needs_grad(ix)) gg.accumulate_grad(ix, gy, /*may_steal=*/false);
        if (gg.needs_grad(ie)) {
            Tensor ge({n, c}, 0.0);
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const real* pg = gy.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                    real s = 0;
                    for (int64_t i = 0; i < hw; ++i) s += pg[i];
                    ge.data()[static_cast<int64_t>(ni) * c + ci] = s;
                }
            gg.accumulate_grad(ie, std::move(ge));
        }
    });
    return Val{&g, id};
}

Val mul_nc(Val x, Val e) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    const Tensor& et = tv(e);
    if (xt.ndim() != 4 || et.ndim() != 2 || et.dim(0) != xt.dim(0) || et.dim(1) != xt.dim(1))
        throw std::invalid_argument("mul_nc: wants (N,C,H,W) * (N,C)");
    const int n = xt.dim(0), c = xt.dim(1);
    const int64_t hw = static_cast<int64_t>(xt.dim(2)) * xt.dim(3);
    Tensor out(xt.shape());
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const real ev = et.data()[static_cast<int64_t>(ni) * c + ci];
            const real* px = xt.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            real* po = out.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) po[i] = px[i] * ev;
        }
    const int self = g.size();
    const int ix = x.id, ie = e.id;
    int id = g.add_node(std::move(out), {ix, ie}, [self, ix, ie, n, c, hw](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        const Tensor& ev = gg.val(ie);
        if (gg.needs_grad(ix)) {
            const Tensor& xv [[maybe_unused]] = gg.val(ix);
            Tensor gx(gg.val(ix).shape());
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const real f = ev.data()[static_cast<int64_t>(ni) * c + ci];
                    const real* pg = gy.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                    real* po = gx.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                    for (int64_t i = 0; i < hw; ++i) po[i] = pg[i] * f;
                }
            gg.accumulate_grad(ix, std::move(gx));
        }
        if (gg.needs_grad(ie)) {
            const Tensor& xv = gg.val(ix);
            Tensor ge({n, c}, 0.0);
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const real* pg = gy.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                    const real* px = xv.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                    real s = 0;
                    for (int64_t i = 0; i < hw; ++i) s += pg[i] * px[i];
                    ge.data()[static_cast<int64_t>(ni) * c + ci] = s;
                }
            gg.accumulate_grad(ie, std::move(ge));
        }
    });
    return Val{&g, id};
}

Val group_norm(Val x, int groups, Val gamma, Val beta, real eps) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("group_norm: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    if (c % groups) throw std::invalid_argument("group_norm: channels not divisible by groups");
    const Tensor& ga = tv(gamma);
    const Tensor& be = tv(beta);
    if (ga.numel() != c || be.numel() != c)
        throw std::invalid_argument("group_norm: bad affine shape");
    const int cg = c / groups;
    const int64_t gsz = static_cast<int64_t>(cg) * h * w;
    Tensor out(xt.shape());
    Tensor mean({n, groups});
    Tensor istd({n, groups});
#pragma omp parallel for collapse(2) schedule(static)
    for (int ni = 0; ni < n; ++ni)
        for (int gi = 0; gi < groups; ++gi) {
            const real* px = xt.data() + (static_cast<int64_t>(ni) * c + gi * cg) * h * w;
            real mu = 0;
            for (int64_t i = 0; i < gsz; ++i) mu += px[i];
            mu /= static_cast<real>(gsz);
            real var = 0;
            for (int64_t i = 0; i < gsz; ++i) {
                const real d = px[i] - mu;
                var += d * d;
            }
            var /= static_cast<real>(gsz);
            const real is = 1.0 / std::sqrt(var + eps);
            mean.data()[ni * groups + gi] = mu;
            istd.data()[ni * groups + gi] = is;
            real* po = out.data() + (static_cast<int64_t>(ni) * c + gi * cg) * h * w;
            for (int ci = 0; ci < cg; ++ci) {
                const real gmul = ga.data()[gi * cg + ci];
                const real badd = be.data()[gi * cg + ci];
                const real* pxc = px + static_cast<int64_t>(ci) * h * w;
                real* poc = po + static_cast<int64_t>(ci) * h * w;
                for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i)
                    poc[i] = (pxc[i] - mu) * is * gmul + badd;
            }
        }
    const int self = g.size();
    const int ix = x.id, iga = gamma.id, ibe = beta.id;
    int id = g.add_node(
        std::move(out), {ix, iga, ibe},
        [self, ix, iga, ibe, n, c, h, w, groups, cg, gsz, mean, istd](Graph& gg) {
            const Tensor& gy = gg.grad(self);
            const Tensor& xv = gg.val(ix);
            const Tensor& gav = gg.val(iga);
            const bool need_x = gg.needs_grad(ix);
            const bool need_a = gg.needs_grad(iga);
            const bool need_b = gg.needs_grad(ibe);
            Tensor gx;
            if (need_x) gx = Tensor({n, c, h, w});
            Tensor dgamma({c}, 0.0), dbeta({c}, 0.0);
            const int64_t hw = static_cast<int64_t>(h) * w;
            for (int ni = 0; ni < n; ++ni)
                for (int gi = 0; gi < groups; ++gi) {
                    const real mu = mean.data()[ni * groups + gi];
                    const real is = istd.data()[ni * groups + gi];
                    const int64_t base = (static_cast<int64_t>(ni) * c + gi * cg) * hw;
                    const real* px = xv.data() + base;
                    const real* pg = gy.data() + base;
                    // accumulate per-channel stats, then group sums
                    real sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (int ci = 0; ci < cg; ++ci) {
                        const real gmul = gav.data()[gi * cg + ci];
                        const real* pxc = px + ci * hw;
                        const real* pgc = pg + ci * hw;
                        real dg = 0, db = 0;
                        for (int64_t i = 0; i < hw; ++i) {
                            const real xhat = (pxc[i] - mu) * is;
                            dg += pgc[i] * xhat;
                            db += pgc[i];
                            const real dxhat = pgc[i] * gmul;
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                        dgamma[gi * cg + ci] += dg;
                        dbeta[gi * cg + ci] += db;
                    }
                    if (need_x) {
                        const real inv_m = 1.0 / static_cast<real>(gsz);
                        real* pgx = gx.data() + base;
                        for (int ci = 0; ci < cg; ++ci) {
                            const real gmul = gav.data()[gi * cg + ci];
                            const real* pxc = px + ci * hw;
                            const real* pgc = pg + ci * hw;
                            real* pgxc = pgx + ci * hw;
                            for (int64_t i = 0; i < hw; ++i) {
                                const real xhat = (pxc[i] - mu) * is;
                                const real dxhat = pgc[i] * gmul;
                                pgxc[i] = is * (dxhat - inv_m * (sum_dxhat + xhat * sum_dxhat_xhat));
                            }
                        }
                    }
                }
            if (need_x) gg.accumulate_grad(ix, std::move(gx));
            if (need_a) gg.accumulate_grad(iga, std::move(dgamma));
            if (need_b) gg.accumulate_grad(ibe, std::move(dbeta));
        });
    return Val{&g, id};
}

Val dropout(Val x, real p) {
    Graph& g = gr(x);
    if (!g.training() || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    if (!g.rng) throw std::invalid_argument("dropout: graph has no rng");
    const Tensor& xt = tv(x);
    Tensor mask(xt.shape());
    const real keep = 1.0 - p;
    const real inv = 1.0 / keep;
    for (int64_t i = 0, n = xt.numel(); i < n; ++i)
        mask[i] = g.rng->uniform() < keep ? inv : 0.0;
    Tensor out = map2(xt, mask, [](real a, real m) { return a * m; });
    const int self = g.size();
    const int ixp = x.id;
    int id = g.add_node(std::move(out), {ixp}, [self, ixp, mask](Graph& gg) {
        gg.accumulate_grad(ixp, map2(gg.grad(self), mask, [](real gv, real m) { return gv * m; }));
    });
    return Val{&g, id};
}

Val avg_pool(Val x, int kh, int kw) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("avg_pool: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    if (h % kh || w % kw) throw std::invalid_argument("avg_pool: size not divisible by kernel");
    const int ho = h / kh, wo = w / kw;
    const real inv = 1.0 / (kh * kw);
    Tensor out({n, c, ho, wo});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const real* px = xt.data() + static_cast<int64_t>(nc) * h * w;
        real* po = out.data() + static_cast<int64_t>(nc) * ho * wo;
        for (int oh = 0; oh < ho; ++oh)
            for (int ow = 0; ow < wo; ++ow) {
                real s = 0;
                for (int i = 0; i < kh; ++i)
                    for (int j = 0; j < kw; ++j) s += px[(oh * kh + i) * w + ow * kw + j];
                po[oh * wo + ow] = s * inv;
            }
    }
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix, n, c, h, w, ho, wo, kh, kw, inv](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gx({n, c, h, w});
        for (int nc = 0; nc < n * c; ++nc) {
            const real* pg = gy.data() + static_cast<int64_t>(nc) * ho * wo;
            real* po = gx.data() + static_cast<int64_t>(nc) * h * w;
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) {
                    const real v = pg[oh * wo + ow] * inv;
                    for (int i = 0; i < kh; ++i)
                        for (int j = 0; j < kw; ++j) po[(oh * kh + i) * w + ow * kw + j] = v;
                }
        }
        gg.accumulate_grad(ix, std::move(gx));
    });
    return Val{&g, id};
}

Val upsample_nearest2(Val x) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("upsample_nearest2: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    Tensor out({n, c, h * 2, w * 2});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const real* px = xt.data() + static_cast<int64_t>(nc) * h * w;
        real* po = out.data() + static_cast<int64_t>(nc) * h * w * 4;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const real v = px[i * w + j];
                po[(2 * i) * 2 * w + 2 * j] = v;
                po[(2 * i) * 2 * w + 2 * j + 1] = v;
                po[(2 * i + 1) * 2 * w + 2 * j] = v;
                po[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
            }
    }
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix, n, c, h, w](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gx({n, c, h, w});
        for (int nc = 0; nc < n * c; ++nc) {
            const real* pg = gy.data() + static_cast<int64_t>(nc) * h * w * 4;
            real* po = gx.data() + static_cast<int64_t>(nc) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    po[i * w + j] = pg[(2 * i) * 2 * w + 2 * j] + pg[(2 * i) * 2 * w + 2 * j + 1] +
                                    pg[(2 * i + 1) * 2 * w + 2 * j] +
                                    pg[(2 * i + 1) * 2 * w + 2 * j + 1];
        }
        gg.accumulate_grad(ix, std::move(gx));
    });
    return Val{&g, id};
}

Val mean_h(Val x) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("mean_h: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    const real inv = 1.0 / h;
    Tensor out({n, w, c});
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const real* px = xt.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int wi = 0; wi < w; ++wi) {
                real s = 0;
                for (int hi = 0; hi < h; ++hi) s += px[hi * w + wi];
                out.data()[(static_cast<int64_t>(ni) * w + wi) * c + ci] = s * inv;
            }
        }
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix, n, c, h, w, inv](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gx({n, c, h, w});
        for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci) {
                real* po = gx.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
                for (int wi = 0; wi < w; ++wi) {
                    const real v = gy.data()[(static_cast<int64_t>(ni) * w + wi) * c + ci] * inv;
                    for (int hi = 0; hi < h; ++hi) po[hi * w + wi] = v;
                }
            }
        gg.accumulate_grad(ix, std::move(gx));
    });
    return Val{&g, id};
}

Val broadcast_h(Val s, int h) {
    Graph& g = gr(s);
    const Tensor& st = tv(s);
    if (st.ndim() != 3) throw std::invalid_argument("broadcast_h: expects (N,W,C)");
    const int n = st.dim(0), w = st.dim(1), c = st.dim(2);
    Tensor out({n, c, h, w});
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            real* po = out.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int wi = 0; wi < w; ++wi) {
                const real v = st.data()[(static_cast<int64_t>(ni) * w + wi) * c + ci];
                for (int hi = 0; hi < h; ++hi) po[hi * w + wi] = v;
            }
        }
    const int self = g.size();
    const int is = s.id;
    int id = g.add_node(std::move(out), {is}, [self, is, n, c, h, w](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gs({n, w, c});
        for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci) {
                const real* pg = gy.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
                for (int wi = 0; wi < w; ++wi) {
                    real acc = 0;
                    for (int hi = 0; hi < h; ++hi) acc += pg[hi * w + wi];
                    gs.data()[(static_cast<int64_t>(ni) * w + wi) * c + ci] = acc;
                }
            }
        gg.accumulate_grad(is, std::move(gs));
    });
    return Val{&g, id};
}

namespace {

// Orthonormal single-level Haar transform; subband order LL, LH, HL, HH.
Tensor haar_fwd_tensor(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 || w % 2) throw std::invalid_argument("haar_dwt: odd spatial size");
    const int ho = h / 2, wo = w / 2;
    Tensor out({n, 4 * c, ho, wo});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const int ni = nc / c, ci = nc % c;
        const real* px = x.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
        real* ll = out.data() + (static_cast<int64_t>(ni) * 4 * c + ci) * ho * wo;
        real* lh = out.data() + (static_cast<int64_t>(ni) * 4 * c + c + ci) * ho * wo;
        real* hl = out.data() + (static_cast<int64_t>(ni) * 4 * c + 2 * c + ci) * ho * wo;
        real* hh = out.data() + (static_cast<int64_t>(ni) * 4 * c + 3 * c + ci) * ho * wo;
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                const real a = px[(2 * i) * w + 2 * j];
                const real b = px[(2 * i) * w + 2 * j + 1];
                const real cc = px[(2 * i + 1) * w + 2 * j];
                const real dd = px[(2 * i + 1) * w + 2 * j + 1];
                ll[i * wo + j] = 0.5 * (a + b + cc + dd);
                lh[i * wo + j] = 0.5 * (a - b + cc - dd);
                hl[i * wo + j] = 0.5 * (a + b - cc - dd);
                hh[i * wo + j] = 0.5 * (a - b - cc + dd);
            }
    }
    return out;
}

Tensor haar_inv_tensor(const Tensor& y) {
    const int n = y.dim(0), c4 = y.dim(1), ho = y.dim(2), wo = y.dim(3);
    if (c4 % 4) throw std::invalid_argument("haar_idwt: channels not divisible by 4");
    const int c = c4 / 4;
    const int h = ho * 2, w = wo * 2;
    Tensor out({n, c, h, w});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const int ni = nc / c, ci = nc % c;
        const real* ll = y.data() + (static_cast<int64_t>(ni) * c4 + ci) * ho * wo;
        const real* lh = y.data() + (static_cast<int64_t>(ni) * c4 + c + ci) * ho * wo;
        const real* hl = y.data() + (static_cast<int64_t>(ni) * c4 + 2 * c + ci) * ho * wo;
        const real* hh = y.data() + (static_cast<int64_t>(ni) * c4 + 3 * c + ci) * ho * wo;
        real* px = out.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                const real l0 = ll[i * wo + j], l1 = lh[i * wo + j];
                const real h0 = hl[i * wo + j], h1 = hh[i * wo + j];
                px[(2 * i) * w + 2 * j] = 0.5 * (l0 + l1 + h0 + h1);
                px[(2 * i) * w + 2 * j + 1] = 0.5 * (l0 - l1 + h0 - h1);
                px[(2 * i + 1) * w + 2 * j] = 0.5 * (l0 + l1 - h0 - h1);
                px[(2 * i + 1) * w + 2 * j + 1] = 0.5 * (l0 - l1 - h0 + h1);
            }
    }
    return out;
}

}  // namespace

Val haar_dwt(Val x) {
    Graph& g = gr(x);
    Tensor out = haar_fwd_tensor(tv(x));
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix](Graph& gg) {
        gg.accumulate_grad(ix, haar_inv_tensor(gg.grad(self)));
    });
    return Val{&g, id};
}

Val haar_idwt(Val x) {
    Graph& g = gr(x);
    Tensor out = haar_inv_tensor(tv(x));
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix](Graph& gg) {
        gg.accumulate_grad(ix, haar_fwd_tensor(gg.grad(self)));
    });
    return Val{&g, id};
}

namespace {

// 3x3 Laplacian with replicated borders, so constants map to zero
// everywhere. The resulting operator is symmetric, making the adjoint the
// same stencil.
Tensor laplacian_tensor(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out({n, c, h, w});
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < n * c; ++nc) {
        const real* px = x.data() + static_cast<int64_t>(nc) * h * w;
        real* po = out.data() + static_cast<int64_t>(nc) * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const int iu = i > 0 ? i - 1 : 0;
                const int id = i + 1 < h ? i + 1 : h - 1;
                const int jl = j > 0 ? j - 1 : 0;
                const int jr = j + 1 < w ? j + 1 : w - 1;
                po[i * w + j] = px[iu * w + j] + px[id * w + j] + px[i * w + jl] +
                                px[i * w + jr] - 4.0 * px[i * w + j];
            }
    }
    return out;
}

}  // namespace

Val laplacian(Val x) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("laplacian: expects NCHW");
    Tensor out = laplacian_tensor(xt);
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix](Graph& gg) {
        gg.accumulate_grad(ix, laplacian_tensor(gg.grad(self)));
    });
    return Val{&g, id};
}

Val diff_w(Val x) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("diff_w: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    if (w < 2) throw std::invalid_argument("diff_w: width must be >= 2");
    Tensor out({n, c, h, w - 1});
    for (int nc = 0; nc < n * c; ++nc) {
        const real* px = xt.data() + static_cast<int64_t>(nc) * h * w;
        real* po = out.data() + static_cast<int64_t>(nc) * h * (w - 1);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j + 1 < w; ++j) po[i * (w - 1) + j] = px[i * w + j + 1] - px[i * w + j];
    }
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix, n, c, h, w](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gx({n, c, h, w});
        for (int nc = 0; nc < n * c; ++nc) {
            const real* pg = gy.data() + static_cast<int64_t>(nc) * h * (w - 1);
            real* po = gx.data() + static_cast<int64_t>(nc) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    real v = 0;
                    if (j > 0) v += pg[i * (w - 1) + j - 1];
                    if (j + 1 < w) v -= pg[i * (w - 1) + j];
                    po[i * w + j] = v;
                }
        }
        gg.accumulate_grad(ix, std::move(gx));
    });
    return Val{&g, id};
}

Val diff_h(Val x) {
    Graph& g = gr(x);
    const Tensor& xt = tv(x);
    if (xt.ndim() != 4) throw std::invalid_argument("diff_h: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    if (h < 2) throw std::invalid_argument("diff_h: height must be >= 2");
    Tensor out({n, c, h - 1, w});
    for (int nc = 0; nc < n * c; ++nc) {
        const real* px = xt.data() + static_cast<int64_t>(nc) * h * w;
        real* po = out.data() + static_cast<int64_t>(nc) * (h - 1) * w;
        for (int i = 0; i + 1 < h; ++i)
            for (int j = 0; j < w; ++j) po[i * w + j] = px[(i + 1) * w + j] - px[i * w + j];
    }
    const int self = g.size();
    const int ix = x.id;
    int id = g.add_node(std::move(out), {ix}, [self, ix, n, c, h, w](Graph& gg) {
        const Tensor& gy = gg.grad(self);
        Tensor gx({n, c, h, w});
        for (int nc = 0; nc < n * c; ++nc) {
            const real* pg = gy.data() + static_cast<int64_t>(nc) * (h - 1) * w;
            real* po = gx.data() + static_cast<int64_t>(nc) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    real v = 0;
                    if (i > 0) v += pg[(i - 1) * w + j];
                    if (i + 1 < h) v -= pg[i * w + j];
                    po[i * w + j] = v;
                }
        }
        gg.accumulate_grad(ix, std::move(gx));
    });
    return Val{&g, id};
}

Val detach(Val x) {
    Graph& g = gr(x);
    return g.leaf(tv(x));  // aliases the forward value, no parents
}

Val linear(Val x, Val w, Val b) {
    Val y = matmul(x, w, false);
    return b.ok() ? add_rowvec(y, b) : y;
}

Val mean_abs(Val diff) { return mean_all(abs_(diff)); }

Val rms(Val diff) { return sqrt_(mean_all(square(diff))); }

}  // namespace textsr::ops
