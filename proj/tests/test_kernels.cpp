#include <cmath>
#include <vector>

#include "doctest.h"
#include "textsr/core/kernels.hpp"
#include "textsr/core/rng.hpp"

using namespace textsr;
using kern::ConvDims;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int> shape) {
    Tensor t(std::move(shape));
    rng.fill_gaussian(t);
    return t;
}

}  // namespace

TEST_CASE("conv2d serial and omp builds agree bitwise") {
    Rng rng(42);
    struct Case {
        int n, ci, h, w, co, k, stride, pad, dil;
    };
    const std::vector<Case> cases = {
        {2, 3, 8, 16, 5, 3, 1, 1, 1}, {1, 4, 9, 7, 3, 3, 1, 1, 2},
        {2, 2, 8, 8, 4, 3, 2, 1, 1},  {1, 1, 5, 5, 1, 1, 1, 0, 1},
        {2, 6, 6, 10, 8, 3, 1, 2, 2},
    };
    for (const auto& c : cases) {
        ConvDims d;
        d.n = c.n; d.ci = c.ci; d.h = c.h; d.w = c.w;
        d.co = c.co; d.kh = c.k; d.kw = c.k;
        d.stride = c.stride; d.pad = c.pad; d.dil = c.dil;
        Tensor x = rand_tensor(rng, {d.n, d.ci, d.h, d.w});
        Tensor w = rand_tensor(rng, {d.co, d.ci, d.kh, d.kw});
        Tensor b = rand_tensor(rng, {d.co});
        Tensor y1({d.n, d.co, d.ho(), d.wo()});
        Tensor y2(y1.shape());
        kern::serial::conv2d_fwd(x.data(), w.data(), b.data(), y1.data(), d);
        kern::omp::conv2d_fwd(x.data(), w.data(), b.data(), y2.data(), d);
        for (int64_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);

        Tensor gy = rand_tensor(rng, y1.shape());
        Tensor gx1(x.shape()), gx2(x.shape());
        kern::serial::conv2d_bwd_input(gy.data(), w.data(), gx1.data(), d);
        kern::omp::conv2d_bwd_input(gy.data(), w.data(), gx2.data(), d);
        for (int64_t i = 0; i < gx1.numel(); ++i) CHECK(gx1[i] == gx2[i]);

        Tensor gw1(w.shape()), gw2(w.shape()), gb1(b.shape()), gb2(b.shape());
        kern::serial::conv2d_bwd_weight(gy.data(), x.data(), gw1.data(), gb1.data(), d);
        kern::omp::conv2d_bwd_weight(gy.data(), x.data(), gw2.data(), gb2.data(), d);
        for (int64_t i = 0; i < gw1.numel(); ++i) CHECK(gw1[i] == gw2[i]);
        for (int64_t i = 0; i < gb1.numel(); ++i) CHECK(gb1[i] == gb2[i]);
    }
}

TEST_CASE("conv2d adjoint identity <conv(x), gy> == <x, conv_bwd(gy)>") {
    Rng rng(7);
    ConvDims d;
    d.n = 2; d.ci = 3; d.h = 6; d.w = 8; d.co = 4; d.kh = 3; d.kw = 3;
    d.stride = 1; d.pad = 1; d.dil = 1;
    Tensor x = rand_tensor(rng, {d.n, d.ci, d.h, d.w});
    Tensor w = rand_tensor(rng, {d.co, d.ci, 3, 3});
    Tensor y({d.n, d.co, d.ho(), d.wo()});
    kern::conv2d_fwd(x.data(), w.data(), nullptr, y.data(), d);
    Tensor gy = rand_tensor(rng, y.shape());
    Tensor gx(x.shape());
    kern::conv2d_bwd_input(gy.data(), w.data(), gx.data(), d);
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < y.numel(); ++i) lhs += y[i] * gy[i];
    for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * gx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("matmul agrees across builds and transpose modes") {
    Rng rng(5);
    const int m = 17, k = 9, n = 13;
    Tensor a = rand_tensor(rng, {m, k});
    Tensor at = rand_tensor(rng, {k, m});
    Tensor b = rand_tensor(rng, {k, n});
    Tensor bt = rand_tensor(rng, {n, k});
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb)
            for (int acc = 0; acc < 2; ++acc) {
                Tensor c1({m, n}, 0.5), c2({m, n}, 0.5);
                const real* pa = ta ? at.data() : a.data();
                const real* pb = tb ? bt.data() : b.data();
                kern::serial::matmul(pa, pb, c1.data(), m, k, n, ta, tb, acc);
                kern::omp::matmul(pa, pb, c2.data(), m, k, n, ta, tb, acc);
                for (int64_t i = 0; i < c1.numel(); ++i) CHECK(c1[i] == c2[i]);
            }
    // spot-check against a plain triple loop
    Tensor c({m, n}, 0.0);
    kern::matmul(a.data(), b.data(), c.data(), m, k, n, false, false, false);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("reduce_sum agrees across builds and thread counts") {
    Rng rng(9);
    for (int64_t n : {int64_t(1), int64_t(100), int64_t(8192), int64_t(8193), int64_t(100000)}) {
        Tensor x({static_cast<int>(n)});
        rng.fill_gaussian(x);
        CHECK(kern::serial::reduce_sum(x.data(), n) == kern::omp::reduce_sum(x.data(), n));
    }
}

TEST_CASE("repeated parallel runs are bit reproducible") {
    Rng rng(11);
    ConvDims d;
    d.n = 2; d.ci = 8; d.h = 16; d.w = 32; d.co = 8; d.kh = 3; d.kw = 3;
    d.stride = 1; d.pad = 1; d.dil = 1;
    Tensor x = rand_tensor(rng, {d.n, d.ci, d.h, d.w});
    Tensor w = rand_tensor(rng, {d.co, d.ci, 3, 3});
    Tensor y1({d.n, d.co, d.ho(), d.wo()}), y2(y1.shape());
    kern::omp::conv2d_fwd(x.data(), w.data(), nullptr, y1.data(), d);
    kern::omp::conv2d_fwd(x.data(), w.data(), nullptr, y2.data(), d);
    for (int64_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}
