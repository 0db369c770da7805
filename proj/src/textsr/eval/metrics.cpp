#include "textsr/eval/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace textsr::eval {

namespace {

real to01(real x) { return (x + 1.0) * 0.5; }

}  // namespace

real psnr(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "psnr");
    real mse = 0;
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const real d = to01(a[i]) - to01(b[i]);
        mse += d * d;
    }
    mse /= static_cast<real>(n);
    if (mse == 0.0) return std::numeric_limits<real>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

real ssim(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "ssim");
    if (a.ndim() != 3) throw std::invalid_argument("ssim: expects (C,H,W)");
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    const int win = std::min({11, h, w});
    const real sigma = 1.5;
    std::vector<real> kern(static_cast<size_t>(win) * win);
    const real center = (win - 1) * 0.5;
    real ksum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const real dy = i - center, dx = j - center;
            kern[i * win + j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            ksum += kern[i * win + j];
        }
    for (real& v : kern) v /= ksum;

    constexpr real c1 = 0.01 * 0.01;  // (K1 L)^2, L = 1
    constexpr real c2 = 0.03 * 0.03;
    real total = 0;
    for (int ch = 0; ch < c; ++ch) {
        const real* pa = a.data() + static_cast<int64_t>(ch) * h * w;
        const real* pb = b.data() + static_cast<int64_t>(ch) * h * w;
        real acc = 0;
        int count = 0;
        for (int y = 0; y + win <= h; ++y)
            for (int x = 0; x + win <= w; ++x) {
                real ma = 0, mb = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const real kv = kern[i * win + j];
                        ma += kv * to01(pa[(y + i) * w + x + j]);
                        mb += kv * to01(pb[(y + i) * w + x + j]);
                    }
                real va = 0, vb = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const real kv = kern[i * win + j];
                        const real da = to01(pa[(y + i) * w + x + j]) - ma;
                        const real db = to01(pb[(y + i) * w + x + j]) - mb;
                        va += kv * da * da;
                        vb += kv * db * db;
                        cov += kv * da * db;
                    }
                acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        total += acc / count;
    }
    return total / c;
}

real edge_distance(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "edge_distance");
    if (a.ndim() != 3) throw std::invalid_argument("edge_distance: expects (C,H,W)");
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    auto lap = [&](const real* p, int y, int x) {
        const int yu = y > 0 ? y - 1 : 0;
        const int yd = y + 1 < h ? y + 1 : h - 1;
        const int xl = x > 0 ? x - 1 : 0;
        const int xr = x + 1 < w ? x + 1 : w - 1;
        return p[yu * w + x] + p[yd * w + x] + p[y * w + xl] + p[y * w + xr] -
               4.0 * p[y * w + x];
    };
    real acc = 0;
    for (int ch = 0; ch < c; ++ch) {
        const real* pa = a.data() + static_cast<int64_t>(ch) * h * w;
        const real* pb = b.data() + static_cast<int64_t>(ch) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const real d = lap(pa, y, x) - lap(pb, y, x);
                acc += d * d;
            }
    }
    return std::sqrt(acc / a.numel());
}

}  // namespace textsr::eval
