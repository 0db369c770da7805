#include "textsr/data/image.hpp"

#include <algorithm>
#include <cmath>

namespace textsr::data {

Tensor tensor_from_u8(const ImageU8& img) {
    Tensor t({img.channels, img.h, img.w});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                t[(static_cast<int64_t>(c) * img.h + y) * img.w + x] =
                    img.at(y, x, c) / 127.5 - 1.0;
    return t;
}

ImageU8 u8_from_tensor(const Tensor& t) {
    if (t.ndim() != 3) throw std::invalid_argument("u8_from_tensor: expects (C,H,W)");
    ImageU8 img;
    img.channels = t.dim(0);
    img.h = t.dim(1);
    img.w = t.dim(2);
    img.pix.resize(static_cast<size_t>(img.channels) * img.h * img.w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const real v = std::lround((t[(static_cast<int64_t>(c) * img.h + y) * img.w + x] +
                                            1.0) * 127.5);
                img.at(y, x, c) = static_cast<uint8_t>(std::clamp<real>(v, 0.0, 255.0));
            }
    return img;
}

Tensor load_image(const std::string& path) { return tensor_from_u8(read_png(path)); }

void save_image(const std::string& path, const Tensor& t) { write_png(path, u8_from_tensor(t)); }

namespace {

// Keys cubic kernel, a = -0.5.
real cubic_weight(real x) {
    x = std::fabs(x);
    constexpr real a = -0.5;
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

}  // namespace

Tensor bicubic_resize(const Tensor& t, int out_h, int out_w) {
    if (t.ndim() != 3) throw std::invalid_argument("bicubic_resize: expects (C,H,W)");
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    const real sy = static_cast<real>(h) / out_h;
    const real sx = static_cast<real>(w) / out_w;
    Tensor out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        const real* src = t.data() + static_cast<int64_t>(ch) * h * w;
        real* dst = out.data() + static_cast<int64_t>(ch) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const real fy = (oy + 0.5) * sy - 0.5;
            const int y0 = static_cast<int>(std::floor(fy));
            for (int ox = 0; ox < out_w; ++ox) {
                const real fx = (ox + 0.5) * sx - 0.5;
                const int x0 = static_cast<int>(std::floor(fx));
                real acc = 0, wsum = 0;
                for (int dy = -1; dy <= 2; ++dy) {
                    const int yy = std::clamp(y0 + dy, 0, h - 1);
                    const real wy = cubic_weight(fy - (y0 + dy));
                    for (int dx = -1; dx <= 2; ++dx) {
                        const int xx = std::clamp(x0 + dx, 0, w - 1);
                        const real wt = wy * cubic_weight(fx - (x0 + dx));
                        acc += wt * src[yy * w + xx];
                        wsum += wt;
                    }
                }
                dst[oy * out_w + ox] = acc / wsum;
            }
        }
    }
    return out;
}

Tensor area_downsample2(const Tensor& t) {
    if (t.ndim() != 3) throw std::invalid_argument("area_downsample2: expects (C,H,W)");
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    if (h % 2 || w % 2) throw std::invalid_argument("area_downsample2: odd spatial size");
    Tensor out({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch) {
        const real* src = t.data() + static_cast<int64_t>(ch) * h * w;
        real* dst = out.data() + static_cast<int64_t>(ch) * (h / 2) * (w / 2);
        for (int y = 0; y < h / 2; ++y)
            for (int x = 0; x < w / 2; ++x)
                dst[y * (w / 2) + x] = 0.25 * (src[(2 * y) * w + 2 * x] +
                                               src[(2 * y) * w + 2 * x + 1] +
                                               src[(2 * y + 1) * w + 2 * x] +
                                               src[(2 * y + 1) * w + 2 * x + 1]);
    }
    return out;
}

Tensor gaussian_blur(const Tensor& t, real sigma) {
    if (t.ndim() != 3) throw std::invalid_argument("gaussian_blur: expects (C,H,W)");
    if (sigma <= 0.0) return t.clone();
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<real> k(2 * radius + 1);
    real sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (real& v : k) v /= sum;

    Tensor tmp({c, h, w}), out({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        const real* src = t.data() + static_cast<int64_t>(ch) * h * w;
        real* mid = tmp.data() + static_cast<int64_t>(ch) * h * w;
        real* dst = out.data() + static_cast<int64_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                real acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * src[y * w + std::clamp(x + i, 0, w - 1)];
                mid[y * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                real acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * mid[std::clamp(y + i, 0, h - 1) * w + x];
                dst[y * w + x] = acc;
            }
    }
    return out;
}

namespace {

// Standard luminance quantization table.
constexpr int kQTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

void dct8(const real in[8], real out[8]) {
    for (int k = 0; k < 8; ++k) {
        real s = 0;
        for (int n = 0; n < 8; ++n) s += in[n] * std::cos(M_PI / 8.0 * (n + 0.5) * k);
        out[k] = s * (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0));
    }
}

void idct8(const real in[8], real out[8]) {
    for (int n = 0; n < 8; ++n) {
        real s = 0;
        for (int k = 0; k < 8; ++k)
            s += in[k] * (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                 std::cos(M_PI / 8.0 * (n + 0.5) * k);
        out[n] = s;
    }
}

}  // namespace

Tensor jpeg_like(const Tensor& t, int quality) {
    if (t.ndim() != 3) throw std::invalid_argument("jpeg_like: expects (C,H,W)");
    if (quality >= 100) return t.clone();
    if (quality < 1) throw std::invalid_argument("jpeg_like: quality must be >= 1");
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    if (h % 8 || w % 8) throw std::invalid_argument("jpeg_like: dims must be multiples of 8");
    const real scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    real q[64];
    for (int i = 0; i < 64; ++i)
        q[i] = std::clamp((kQTable[i] * scale + 50.0) / 100.0, 1.0, 255.0);

    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        const real* src = t.data() + static_cast<int64_t>(ch) * h * w;
        real* dst = out.data() + static_cast<int64_t>(ch) * h * w;
        for (int by = 0; by < h; by += 8)
            for (int bx = 0; bx < w; bx += 8) {
                real block[64], coef[64], row[8], colin[8], colout[8];
                // to [0,255] domain, rows then columns DCT
                for (int y = 0; y < 8; ++y) {
                    for (int x = 0; x < 8; ++x) row[x] = (src[(by + y) * w + bx + x] + 1.0) * 127.5;
                    dct8(row, block + y * 8);
                }
                for (int x = 0; x < 8; ++x) {
                    for (int y = 0; y < 8; ++y) colin[y] = block[y * 8 + x];
                    dct8(colin, colout);
                    for (int y = 0; y < 8; ++y) coef[y * 8 + x] = colout[y];
                }
                for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / q[i]) * q[i];
                for (int x = 0; x < 8; ++x) {
                    for (int y = 0; y < 8; ++y) colin[y] = coef[y * 8 + x];
                    idct8(colin, colout);
                    for (int y = 0; y < 8; ++y) block[y * 8 + x] = colout[y];
                }
                for (int y = 0; y < 8; ++y) {
                    idct8(block + y * 8, row);
                    for (int x = 0; x < 8; ++x)
                        dst[(by + y) * w + bx + x] = row[x] / 127.5 - 1.0;
                }
            }
    }
    return out;
}

Tensor clamp_unit(const Tensor& t) {
    Tensor out = t.clone();
    real* p = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) p[i] = std::clamp<real>(p[i], -1.0, 1.0);
    return out;
}

Tensor add_gaussian_noise(const Tensor& t, real sigma, Rng& rng) {
    Tensor out = t.clone();
    if (sigma <= 0.0) return out;
    real* p = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) p[i] += sigma * rng.gaussian();
    return out;
}

}  // namespace textsr::data
