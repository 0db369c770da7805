#pragma once

#include <string>
#include <vector>

#include "textsr/core/rng.hpp"
#include "textsr/data/image.hpp"

namespace textsr::data {

// One training example. lr is (3,16,64), hr (3,32,128), mask_gt (1,32,128)
// with values in {0,1}; all images live in [-1,1].
struct SRSample {
    Tensor lr;
    Tensor hr;
    Tensor mask_gt;
    std::string label;
};

struct DegradationParams {
    real blur_min = 0.9;
    real blur_max = 1.7;
    real noise_sigma = 0.05;   // additive Gaussian in [0,1] scale
    int jpeg_min = 100;        // >= 100 disables the DCT round-trip
    int jpeg_max = 100;
};

// Built-in raster font variants; the glyph set is an embedded 5x7 bitmap
// face covering [0-9a-z], scaled with bilinear smoothing at render time.
std::vector<std::string> builtin_fonts();  // regular, bold, slant, narrow

// Renders a random string of length 4..10 over a shaded background,
// degrades a copy down to LR, and returns the sample together with the
// rasterizer's own binary mask. Deterministic given rng_seed.
SRSample render_sample(uint64_t rng_seed, const std::string& charset,
                       const std::vector<std::string>& fonts, const DegradationParams& degrade);

// The mask rule applied to an arbitrary image: grayscale by channel mean,
// binarize at the image-mean threshold, label the minority-area class 1
// (ties go to the brighter class). Degenerate constant images give an
// all-zero mask.
Tensor mask_from_rgb(const Tensor& img);

void check_charset(const std::string& charset);  // unique, known glyphs only

}  // namespace textsr::data
