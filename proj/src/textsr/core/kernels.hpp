#pragma once

#include <cstdint>

#include "textsr/core/tensor.hpp"

// Hot data-parallel kernels. Each comes in two builds: a plain serial
// reference (kernels_serial.cpp) and an OpenMP version (kernels_omp.cpp).
// Both accumulate every output element in the same order, so results are
// bitwise identical; tests assert that and tools/bench_kernels compares
// throughput. Parallel loops assign each output element to exactly one
// thread, which keeps results independent of the thread count.
namespace textsr::kern {

enum class Exec { serial, parallel };

Exec& exec_mode();  // process-global, defaults to parallel

struct ConvDims {
    int n = 1, ci = 1, h = 1, w = 1;  // input  (n, ci, h, w)
    int co = 1, kh = 1, kw = 1;       // weight (co, ci, kh, kw)
    int stride = 1, pad = 0, dil = 1;

    int ho() const { return (h + 2 * pad - dil * (kh - 1) - 1) / stride + 1; }
    int wo() const { return (w + 2 * pad - dil * (kw - 1) - 1) / stride + 1; }
};

// y (n, co, ho, wo); bias may be nullptr.
void conv2d_fwd(const real* x, const real* wgt, const real* bias, real* y, const ConvDims& d);
// gx (n, ci, h, w), accumulated from scratch (overwrites).
void conv2d_bwd_input(const real* gy, const real* wgt, real* gx, const ConvDims& d);
// gw (co, ci, kh, kw) and gb (co) overwritten; gb may be nullptr.
void conv2d_bwd_weight(const real* gy, const real* x, real* gw, real* gb, const ConvDims& d);

// c (m, n) = a x b with optional transposed storage:
//   ta=false: a is (m, k);  ta=true: a is (k, m)
//   tb=false: b is (k, n);  tb=true: b is (n, k)
// accumulate=true adds into c instead of overwriting.
void matmul(const real* a, const real* b, real* c, int m, int k, int n,
            bool ta, bool tb, bool accumulate);

// Chunked deterministic sum (fixed 8192-element chunks in both builds).
real reduce_sum(const real* x, int64_t n);

// Eight-lane unrolled dot product shared by both conv2d_bwd_weight builds;
// the fixed lane split keeps their accumulation orders identical while
// breaking the FMA latency chain and leaving room for packed registers.
inline real dot4(const real* a, const real* b, int n) {
    real s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    real tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))) + tail;
}

// One (co, ci, kh) slab of the weight gradient, all kw taps in a single
// pass over the rows so gy and x stay in cache; shared between builds.
inline void bwd_weight_slab(const real* gy, const real* x, const ConvDims& d, int ho, int wo,
                            int co, int ci, int kh, real* out_kw) {
    if (d.stride == 1) {
        for (int kw = 0; kw < d.kw; ++kw) out_kw[kw] = 0.0;
        for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < ho; ++oh) {
                const int ih = oh + kh * d.dil - d.pad;
                if (ih < 0 || ih >= d.h) continue;
                const real* grow = gy + (((int64_t)n * d.co + co) * ho + oh) * wo;
                const real* xrow = x + (((int64_t)n * d.ci + ci) * d.h + ih) * d.w;
                for (int kw = 0; kw < d.kw; ++kw) {
                    const int shift = kw * d.dil - d.pad;  // iw = ow + shift
                    const int lo = shift < 0 ? -shift : 0;
                    const int hi = wo < d.w - shift ? wo : d.w - shift;
                    if (lo < hi) out_kw[kw] += dot4(grow + lo, xrow + shift + lo, hi - lo);
                }
            }
        return;
    }
    for (int kw = 0; kw < d.kw; ++kw) {
        real acc = 0;
        for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < ho; ++oh) {
                const int ih = oh * d.stride + kh * d.dil - d.pad;
                if (ih < 0 || ih >= d.h) continue;
                const real* grow = gy + (((int64_t)n * d.co + co) * ho + oh) * wo;
                const real* xrow = x + (((int64_t)n * d.ci + ci) * d.h + ih) * d.w;
                for (int ow = 0; ow < wo; ++ow) {
                    const int iw = ow * d.stride + kw * d.dil - d.pad;
                    if (iw < 0 || iw >= d.w) continue;
                    acc += grow[ow] * xrow[iw];
                }
            }
        out_kw[kw] = acc;
    }
}

namespace serial {
void conv2d_fwd(const real* x, const real* wgt, const real* bias, real* y, const ConvDims& d);
void conv2d_bwd_input(const real* gy, const real* wgt, real* gx, const ConvDims& d);
void conv2d_bwd_weight(const real* gy, const real* x, real* gw, real* gb, const ConvDims& d);
void matmul(const real* a, const real* b, real* c, int m, int k, int n, bool ta, bool tb, bool acc);
real reduce_sum(const real* x, int64_t n);
}  // namespace serial

namespace omp {
void conv2d_fwd(const real* x, const real* wgt, const real* bias, real* y, const ConvDims& d);
void conv2d_bwd_input(const real* gy, const real* wgt, real* gx, const ConvDims& d);
void conv2d_bwd_weight(const real* gy, const real* x, real* gw, real* gb, const ConvDims& d);
void matmul(const real* a, const real* b, real* c, int m, int k, int n, bool ta, bool tb, bool acc);
real reduce_sum(const real* x, int64_t n);
}  // namespace omp

}  // namespace textsr::kern
