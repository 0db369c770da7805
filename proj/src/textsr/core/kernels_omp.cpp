#include "textsr/core/kernels.hpp"

#include <algorithm>
#include <vector>

// OpenMP versions. Work is split so that every output element is written
// by exactly one thread, and per-element accumulation order matches the
// serial reference, so both builds agree bit for bit.

namespace textsr::kern::omp {

void conv2d_fwd(const real* x, const real* wgt, const real* bias, real* y, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
    if (d.stride == 1) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < d.n; ++n)
            for (int co = 0; co < d.co; ++co) {
                std::vector<real> acc(wo);
                for (int oh = 0; oh < ho; ++oh) {
                    const real b = bias ? bias[co] : 0.0;
                    for (int ow = 0; ow < wo; ++ow) acc[ow] = b;
                    for (int ci = 0; ci < d.ci; ++ci)
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int ih = oh + kh * d.dil - d.pad;
                            if (ih < 0 || ih >= d.h) continue;
                            const real* xrow = x + (((int64_t)n * d.ci + ci) * d.h + ih) * d.w;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const real wv = wgt[((co * d.ci + ci) * d.kh + kh) * d.kw + kw];
                                const int shift = kw * d.dil - d.pad;
                                const int lo = std::max(0, -shift);
                                const int hi = std::min(wo, d.w - shift);
                                const real* xs = xrow + shift;
                                for (int ow = lo; ow < hi; ++ow) acc[ow] += wv * xs[ow];
                            }
                        }
                    real* yrow = y + (((int64_t)n * d.co + co) * ho + oh) * wo;
                    for (int ow = 0; ow < wo; ++ow) yrow[ow] = acc[ow];
                }
            }
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) {
                    real acc = bias ? bias[co] : 0.0;
                    for (int ci = 0; ci < d.ci; ++ci)
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int ih = oh * d.stride + kh * d.dil - d.pad;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int iw = ow * d.stride + kw * d.dil - d.pad;
                                if (iw < 0 || iw >= d.w) continue;
                                acc += wgt[((co * d.ci + ci) * d.kh + kh) * d.kw + kw] *
                                       x[(((int64_t)n * d.ci + ci) * d.h + ih) * d.w + iw];
                            }
                        }
                    y[(((int64_t)n * d.co + co) * ho + oh) * wo + ow] = acc;
                }
}

void conv2d_bwd_input(const real* gy, const real* wgt, real* gx, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
    if (d.stride == 1) {
        // gx[ih][iw] += w[kh][kw] * gy[ih - kh*dil + pad][iw - kw*dil + pad]
#pragma omp parallel for collapse(2) schedule(static)
        for (int n = 0; n < d.n; ++n)
            for (int ci = 0; ci < d.ci; ++ci) {
                std::vector<real> acc(d.w);
                for (int ih = 0; ih < d.h; ++ih) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int co = 0; co < d.co; ++co)
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int oh = ih + d.pad - kh * d.dil;
                            if (oh < 0 || oh >= ho) continue;
                            const real* grow = gy + (((int64_t)n * d.co + co) * ho + oh) * wo;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const real wv = wgt[((co * d.ci + ci) * d.kh + kh) * d.kw + kw];
                                const int shift = d.pad - kw * d.dil;  // ow = iw + shift
                                const int lo = std::max(0, -shift);
                                const int hi = std::min(d.w, wo - shift);
                                const real* gs = grow + shift;
                                for (int iw = lo; iw < hi; ++iw) acc[iw] += wv * gs[iw];
                            }
                        }
                    real* gxrow = gx + (((int64_t)n * d.ci + ci) * d.h + ih) * d.w;
                    for (int iw = 0; iw < d.w; ++iw) gxrow[iw] = acc[iw];
                }
            }
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int ci = 0; ci < d.ci; ++ci)
            for (int ih = 0; ih < d.h; ++ih)
                for (int iw = 0; iw < d.w; ++iw) {
                    real acc = 0.0;
                    for (int co = 0; co < d.co; ++co)
                        for (int kh = 0; kh < d.kh; ++kh) {
                            const int oh_num = ih + d.pad - kh * d.dil;
                            if (oh_num < 0 || oh_num % d.stride) continue;
                            const int oh = oh_num / d.stride;
                            if (oh >= ho) continue;
                            for (int kw = 0; kw < d.kw; ++kw) {
                                const int ow_num = iw + d.pad - kw * d.dil;
                                if (ow_num < 0 || ow_num % d.stride) continue;
                                const int ow = ow_num / d.stride;
                                if (ow >= wo) continue;
                                acc += wgt[((co * d.ci + ci) * d.kh + kh) * d.kw + kw] *
                                       gy[(((int64_t)n * d.co + co) * ho + oh) * wo + ow];
                            }
                        }
                    gx[(((int64_t)n * d.ci + ci) * d.h + ih) * d.w + iw] = acc;
                }
}

void conv2d_bwd_weight(const real* gy, const real* x, real* gw, real* gb, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < d.co; ++co)
        for (int ci = 0; ci < d.ci; ++ci)
            for (int kh = 0; kh < d.kh; ++kh)
                bwd_weight_slab(gy, x, d, ho, wo, co, ci, kh,
                                gw + ((co * d.ci + ci) * d.kh + kh) * d.kw);
    if (gb) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < d.co; ++co) {
            real acc = 0.0;
            for (int n = 0; n < d.n; ++n)
                for (int oh = 0; oh < ho; ++oh) {
                    const real* grow = gy + (((int64_t)n * d.co + co) * ho + oh) * wo;
                    for (int ow = 0; ow < wo; ++ow) acc += grow[ow];
                }
            gb[co] = acc;
        }
    }
}

void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool ta, bool tb, bool acc) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        real* crow = c + (int64_t)i * n;
        if (!tb) {
            std::vector<real> row(n, 0.0);
            for (int p = 0; p < k; ++p) {
                const real av = ta ? a[(int64_t)p * m + i] : a[(int64_t)i * k + p];
                const real* brow = b + (int64_t)p * n;
                for (int j = 0; j < n; ++j) row[j] += av * brow[j];
            }
            if (acc)
                for (int j = 0; j < n; ++j) crow[j] += row[j];
            else
                for (int j = 0; j < n; ++j) crow[j] = row[j];
        } else {
            for (int j = 0; j < n; ++j) {
                real s = 0.0;
                const real* bT = b + (int64_t)j * k;
                if (!ta) {
                    const real* arow = a + (int64_t)i * k;
                    for (int p = 0; p < k; ++p) s += arow[p] * bT[p];
                } else {
                    for (int p = 0; p < k; ++p) s += a[(int64_t)p * m + i] * bT[p];
                }
                crow[j] = acc ? crow[j] + s : s;
            }
        }
    }
}

real reduce_sum(const real* x, int64_t n) {
    constexpr int64_t chunk = 8192;
    const int64_t nchunks = (n + chunk - 1) / chunk;
    std::vector<real> partial(nchunks);
#pragma omp parallel for schedule(static)
    for (int64_t ci = 0; ci < nchunks; ++ci) {
        const int64_t c0 = ci * chunk;
        const int64_t c1 = std::min(c0 + chunk, n);
        real s = 0.0;
        for (int64_t i = c0; i < c1; ++i) s += x[i];
        partial[ci] = s;
    }
    real total = 0.0;
    for (int64_t ci = 0; ci < nchunks; ++ci) total += partial[ci];
    return total;
}

}  // namespace textsr::kern::omp
