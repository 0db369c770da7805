// Times the serial reference kernels against the OpenMP builds on the
// shapes this pipeline actually runs, and cross-checks outputs.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "textsr/core/kernels.hpp"
#include "textsr/core/rng.hpp"

using namespace textsr;
using kern::ConvDims;
using clock_t_ = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    auto t0 = clock_t_::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = clock_t_::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

void bench_conv(const char* name, ConvDims d, int reps) {
    Rng rng(1);
    Tensor x = rng.gaussian_tensor({d.n, d.ci, d.h, d.w});
    Tensor w = rng.gaussian_tensor({d.co, d.ci, d.kh, d.kw});
    Tensor b = rng.gaussian_tensor({d.co});
    Tensor y1({d.n, d.co, d.ho(), d.wo()}), y2(y1.shape());
    Tensor gy = rng.gaussian_tensor(y1.shape());
    Tensor gx1(x.shape()), gx2(x.shape());
    Tensor gw1(w.shape()), gw2(w.shape()), gb1(b.shape()), gb2(b.shape());

    const double fs = time_ms([&] { kern::serial::conv2d_fwd(x.data(), w.data(), b.data(), y1.data(), d); }, reps);
    const double fp = time_ms([&] { kern::omp::conv2d_fwd(x.data(), w.data(), b.data(), y2.data(), d); }, reps);
    const double is = time_ms([&] { kern::serial::conv2d_bwd_input(gy.data(), w.data(), gx1.data(), d); }, reps);
    const double ip = time_ms([&] { kern::omp::conv2d_bwd_input(gy.data(), w.data(), gx2.data(), d); }, reps);
    const double ws = time_ms([&] { kern::serial::conv2d_bwd_weight(gy.data(), x.data(), gw1.data(), gb1.data(), d); }, reps);
    const double wp = time_ms([&] { kern::omp::conv2d_bwd_weight(gy.data(), x.data(), gw2.data(), gb2.data(), d); }, reps);

    std::printf("%-26s fwd %8.2f / %8.2f ms (x%.2f)  bwd_in %8.2f / %8.2f (x%.2f)  bwd_w %8.2f / %8.2f (x%.2f)  maxdiff %.1e\n",
                name, fs, fp, fs / fp, is, ip, is / ip, ws, wp, ws / wp,
                std::max({max_abs_diff(y1, y2), max_abs_diff(gx1, gx2), max_abs_diff(gw1, gw2)}));
}

void bench_matmul(const char* name, int m, int k, int n, int reps) {
    Rng rng(2);
    Tensor a = rng.gaussian_tensor({m, k});
    Tensor b = rng.gaussian_tensor({k, n});
    Tensor c1({m, n}), c2({m, n});
    const double ts = time_ms([&] { kern::serial::matmul(a.data(), b.data(), c1.data(), m, k, n, false, false, false); }, reps);
    const double tp = time_ms([&] { kern::omp::matmul(a.data(), b.data(), c2.data(), m, k, n, false, false, false); }, reps);
    std::printf("%-26s %8.2f / %8.2f ms (x%.2f)  maxdiff %.1e\n", name, ts, tp, ts / tp,
                max_abs_diff(c1, c2));
}

}  // namespace

int main() {
    std::printf("serial / openmp per call\n");
    ConvDims hr;   // level-1 conv at HR resolution
    hr.n = 8; hr.ci = 16; hr.h = 32; hr.w = 128; hr.co = 16; hr.kh = 3; hr.kw = 3;
    hr.stride = 1; hr.pad = 1; hr.dil = 1;
    bench_conv("conv 16ch 32x128 b8", hr, 5);

    ConvDims mid = hr;
    mid.ci = 32; mid.co = 32; mid.h = 16; mid.w = 64;
    bench_conv("conv 32ch 16x64 b8", mid, 5);

    ConvDims deep = hr;
    deep.ci = 64; deep.co = 64; deep.h = 8; deep.w = 32;
    bench_conv("conv 64ch 8x32 b8", deep, 5);

    ConvDims dil = mid;
    dil.dil = 4; dil.pad = 4;
    bench_conv("conv 32ch 16x64 dil4", dil, 5);

    ConvDims down = hr;
    down.stride = 2;
    bench_conv("conv 16ch 32x128 s2", down, 5);

    bench_matmul("matmul 4096x64x64", 4096, 64, 64, 5);
    bench_matmul("matmul 256x96x33", 256, 96, 33, 50);
    return 0;
}
