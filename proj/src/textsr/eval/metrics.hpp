#pragma once

#include "textsr/core/tensor.hpp"

namespace textsr::eval {

// Inputs are (C,H,W) images in [-1,1]; metrics are computed after mapping
// to [0,1]. Identical images give +infinity PSNR.
real psnr(const Tensor& a, const Tensor& b);

// SSIM with a Gaussian window (sigma 1.5), side min(11, H, W), valid
// positions only, standard constants K1=0.01 K2=0.03, averaged over
// channels.
real ssim(const Tensor& a, const Tensor& b);

// RMS distance between depthwise Laplacian responses (tensor-side twin of
// the training edge loss).
real edge_distance(const Tensor& a, const Tensor& b);

}  // namespace textsr::eval
