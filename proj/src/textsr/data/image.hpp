#pragma once

#include "textsr/core/rng.hpp"
#include "textsr/core/tensor.hpp"
#include "textsr/data/png_io.hpp"

namespace textsr::data {

// Canonical geometry of the pipeline.
inline constexpr int kLrH = 16, kLrW = 64;
inline constexpr int kHrH = 32, kHrW = 128;

// Image tensors are (C,H,W) in [-1,1]. The 8-bit mapping is
// v = round((x+1) * 127.5) clamped to [0,255], x = v/127.5 - 1.
Tensor tensor_from_u8(const ImageU8& img);
ImageU8 u8_from_tensor(const Tensor& t);

Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& t);

// Keys bicubic (a = -0.5), clamped borders, arbitrary target size.
Tensor bicubic_resize(const Tensor& t, int out_h, int out_w);

// Exact 2x box average; spatial dims must be even.
Tensor area_downsample2(const Tensor& t);

// Separable Gaussian blur, replicated borders; sigma <= 0 returns a copy.
Tensor gaussian_blur(const Tensor& t, real sigma);

// Blockwise 8x8 DCT quantization round-trip, per channel, quality in
// [1, 100); quality >= 100 returns a copy untouched. Spatial dims must be
// multiples of 8.
Tensor jpeg_like(const Tensor& t, int quality);

Tensor clamp_unit(const Tensor& t);  // clamp to [-1, 1]

Tensor add_gaussian_noise(const Tensor& t, real sigma, Rng& rng);

}  // namespace textsr::data
