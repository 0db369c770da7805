#pragma once

#include <vector>

#include "textsr/core/graph.hpp"

// Differentiable tensor ops. Every op allocates a fresh output (reshape and
// slice0 alias), validates shapes, and registers its backward on the tape.
namespace textsr::ops {

// elementwise
Val add(Val a, Val b);
Val sub(Val a, Val b);
Val mul(Val a, Val b);
Val div(Val a, Val b);
Val scale(Val a, real s);
Val add_const(Val a, real c);
Val relu(Val a);
Val lrelu(Val a, real slope = 0.2);
Val silu(Val a);
Val sigmoid(Val a);
Val tanh_(Val a);
Val abs_(Val a);
Val square(Val a);
Val sqrt_(Val a);

// reductions -> shape (1)
Val sum_all(Val a);
Val mean_all(Val a);

// shaping
Val reshape(Val a, std::vector<int> shape);
Val slice0(Val a, int start, int len);
Val concat0(const std::vector<Val>& parts);
Val concat_cols(const std::vector<Val>& parts);      // (M, Ni) -> (M, sum Ni)
Val concat_ch(const std::vector<Val>& parts);        // NCHW, dim 1
Val slice_ch(Val a, int c0, int len);                // NCHW, dim 1
Val slice_cols(Val a, int c0, int len);              // (M, N) columns
Val permute(Val a, const std::vector<int>& axes);

// linear algebra
Val matmul(Val a, Val b, bool tb = false);           // (M,K) x (K,N); tb: b is (N,K)
Val bmm(Val a, Val b, bool tb = false);              // (B,M,K) x (B,K,N); tb: b is (B,N,K)
Val softmax_last(Val a);

// network ops
Val conv2d(Val x, Val w, Val b, int stride = 1, int pad = 0, int dil = 1);
Val linear(Val x, Val w, Val b);                     // (M,K) x (K,N) + (N)
Val add_rowvec(Val a, Val b);                        // (M,N) + (N)
Val add_nc(Val x, Val e);                            // (N,C,H,W) + (N,C)
Val mul_nc(Val x, Val e);                            // (N,C,H,W) * (N,C)
Val group_norm(Val x, int groups, Val gamma, Val beta, real eps = 1e-5);
Val dropout(Val x, real p);
Val avg_pool(Val x, int kh, int kw);                 // stride == kernel
Val upsample_nearest2(Val x);
Val mean_h(Val x);                                   // (N,C,H,W) -> (N,W,C)
Val broadcast_h(Val s, int h);                       // (N,W,C) -> (N,C,H,W)
Val haar_dwt(Val x);                                 // (N,C,H,W) -> (N,4C,H/2,W/2)
Val haar_idwt(Val x);
Val laplacian(Val x);                                // depthwise 3x3, zero pad
Val diff_w(Val x);                                   // forward difference along W
Val diff_h(Val x);                                   // forward difference along H
Val detach(Val x);

// loss helpers
Val mean_abs(Val diff);                              // mean |d|
Val rms(Val diff);                                   // sqrt(mean d^2)

}  // namespace textsr::ops
