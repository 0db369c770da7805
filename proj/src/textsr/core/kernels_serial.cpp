#include "textsr/core/kernels.hpp"

#include <cstring>

// Reference implementations: straightforward loop nests, one output
// element at a time, accumulation order (ci, kh, kw) resp. k ascending.

namespace textsr::kern::serial {

void conv2d_fwd(const real* x, const real* wgt, const real* bias, real* y, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
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
                                       x[((n * d.ci + ci) * d.h + ih) * d.w + iw];
                            }
                        }
                    y[((n * d.co + co) * ho + oh) * wo + ow] = acc;
                }
}

void conv2d_bwd_input(const real* gy, const real* wgt, real* gx, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
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
                                       gy[((n * d.co + co) * ho + oh) * wo + ow];
                            }
                        }
                    gx[((n * d.ci + ci) * d.h + ih) * d.w + iw] = acc;
                }
}

void conv2d_bwd_weight(const real* gy, const real* x, real* gw, real* gb, const ConvDims& d) {
    const int ho = d.ho(), wo = d.wo();
    for (int co = 0; co < d.co; ++co) {
        for (int ci = 0; ci < d.ci; ++ci)
            for (int kh = 0; kh < d.kh; ++kh)
                bwd_weight_slab(gy, x, d, ho, wo, co, ci, kh,
                                gw + ((co * d.ci + ci) * d.kh + kh) * d.kw);
        if (gb) {
            real acc = 0.0;
            for (int n = 0; n < d.n; ++n)
                for (int oh = 0; oh < ho; ++oh)
                    for (int ow = 0; ow < wo; ++ow)
                        acc += gy[((n * d.co + co) * ho + oh) * wo + ow];
            gb[co] = acc;
        }
    }
}

void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool ta, bool tb, bool acc) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            real s = 0.0;
            for (int p = 0; p < k; ++p) {
                const real av = ta ? a[p * m + i] : a[i * k + p];
                const real bv = tb ? b[j * k + p] : b[p * n + j];
                s += av * bv;
            }
            c[i * n + j] = acc ? c[i * n + j] + s : s;
        }
}

real reduce_sum(const real* x, int64_t n) {
    constexpr int64_t chunk = 8192;
    real total = 0.0;
    for (int64_t c0 = 0; c0 < n; c0 += chunk) {
        const int64_t c1 = c0 + chunk < n ? c0 + chunk : n;
        real s = 0.0;
        for (int64_t i = c0; i < c1; ++i) s += x[i];
        total += s;
    }
    return total;
}

}  // namespace textsr::kern::serial
