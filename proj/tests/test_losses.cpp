#include <cmath>

#include "doctest.h"
#include "textsr/model/losses.hpp"
#include "textsr/model/mrd.hpp"
#include "textsr/train/trainer.hpp"

using namespace textsr;
using namespace textsr::model;
namespace o = textsr::ops;

namespace {

double scalar(Graph& g, Val v) { return g.val(v).item(); }

// central-difference check of a loss against the grad of one leaf
template <class MakeLoss>
void fd_against(const MakeLoss& make, const Tensor& x0, double tol = 1e-3) {
    Graph g(true);
    Val x = g.leaf(x0.clone(), true);
    Val loss = make(g, x);
    g.backward(loss);
    Tensor grad = g.grad(x).clone();
    const double h = 1e-6;
    for (int64_t i = 0; i < x0.numel(); ++i) {
        Tensor xp = x0.clone(), xm = x0.clone();
        xp[i] += h;
        xm[i] -= h;
        Graph gp(false), gm(false);
        const double fp = gp.val(make(gp, gp.leaf(xp))).item();
        const double fm = gm.val(make(gm, gm.leaf(xm))).item();
        const double fd = (fp - fm) / (2 * h);
        const double an = grad[i];
        CHECK(std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-4}) < tol);
    }
}

}  // namespace

TEST_CASE("dice loss hand values") {
    // identical binary masks -> 0
    Tensor p({1, 1, 2, 2});
    p[0] = 1; p[1] = 0; p[2] = 1; p[3] = 0;
    {
        Graph g(false);
        CHECK(scalar(g, dice_loss(g.leaf(p), g.leaf(p.clone()))) ==
              doctest::Approx(0.0).epsilon(1e-6));
    }
    // disjoint nonzero -> 1
    Tensor q({1, 1, 2, 2}, 0.0);
    q[1] = 1; q[3] = 1;
    {
        Graph g(false);
        CHECK(scalar(g, dice_loss(g.leaf(p), g.leaf(q))) == doctest::Approx(1.0).epsilon(1e-6));
    }
    // P=[1,0;0,0], G=[1,1;0,0]: dice = 2/3, loss = 1/3
    Tensor pp({1, 1, 2, 2}, 0.0), gg({1, 1, 2, 2}, 0.0);
    pp[0] = 1;
    gg[0] = 1; gg[1] = 1;
    {
        Graph g(false);
        CHECK(scalar(g, dice_loss(g.leaf(pp), g.leaf(gg))) ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    }
}

TEST_CASE("dice loss stays within [0,1] on random soft masks") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor a({1, 1, 3, 5}), b({1, 1, 3, 5});
        rng.fill_uniform(a, 0.0, 1.0);
        rng.fill_uniform(b, 0.0, 1.0);
        Graph g(false);
        const double v = scalar(g, dice_loss(g.leaf(a), g.leaf(b)));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // empty masks survive the epsilon guard
    Graph g(false);
    Tensor z({1, 1, 2, 2}, 0.0);
    const double v = scalar(g, dice_loss(g.leaf(z), g.leaf(z.clone())));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
}

TEST_CASE("gradient profile loss hand value and invariances") {
    // ramp vs flat on 1x1x2x2: dx errors {1,1}, dy errors {0,0}; mean 0.5
    Tensor ramp({1, 1, 2, 2});
    ramp[0] = 0; ramp[1] = 1; ramp[2] = 0; ramp[3] = 1;
    Tensor flat({1, 1, 2, 2}, 0.25);
    {
        Graph g(false);
        CHECK(scalar(g, gradient_profile_loss(g.leaf(flat), g.leaf(ramp))) ==
              doctest::Approx(0.5).epsilon(1e-12));
    }
    // equal inputs -> 0; adding one constant to both -> unchanged
    Rng rng(2);
    Tensor a({1, 3, 4, 6}), b({1, 3, 4, 6});
    rng.fill_gaussian(a);
    rng.fill_gaussian(b);
    Graph g(false);
    CHECK(scalar(g, gradient_profile_loss(g.leaf(a), g.leaf(a.clone()))) ==
          doctest::Approx(0.0));
    const double base = scalar(g, gradient_profile_loss(g.leaf(a), g.leaf(b)));
    Tensor a1 = a.clone(), b1 = b.clone();
    for (int64_t i = 0; i < a1.numel(); ++i) {
        a1[i] += 0.7;
        b1[i] += 0.7;
    }
    CHECK(scalar(g, gradient_profile_loss(g.leaf(a1), g.leaf(b1))) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("edge loss hand value and constant invariance") {
    // single center pixel: laplacian response has -4 at center, 1 at the
    // four neighbours; rms against zeros over the 5x5 field
    Tensor x({1, 1, 5, 5}, 0.0);
    x[2 * 5 + 2] = 1.0;
    Tensor zero({1, 1, 5, 5}, 0.0);
    const double expect = std::sqrt((16.0 + 4.0) / 25.0);
    {
        Graph g(false);
        CHECK(scalar(g, edge_loss(g.leaf(x), g.leaf(zero))) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
    // any two constant images -> 0
    Graph g(false);
    Tensor c1({1, 2, 3, 4}, 0.3), c2({1, 2, 3, 4}, -0.8);
    CHECK(scalar(g, edge_loss(g.leaf(c1), g.leaf(c2))) == doctest::Approx(0.0));
    // edge_loss(a,b) == edge_loss(a+c, b+c)
    Rng rng(3);
    Tensor a({1, 1, 4, 4}), b({1, 1, 4, 4});
    rng.fill_gaussian(a);
    rng.fill_gaussian(b);
    const double base = scalar(g, edge_loss(g.leaf(a), g.leaf(b)));
    Tensor a1 = a.clone(), b1 = b.clone();
    for (int64_t i = 0; i < a1.numel(); ++i) {
        a1[i] += 2.5;
        b1[i] += 2.5;
    }
    CHECK(scalar(g, edge_loss(g.leaf(a1), g.leaf(b1))) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("dm loss mock denoiser cases") {
    auto sched = diffusion::make_linear_schedule(50, 1e-5, 1e-2);
    Rng rng(4);
    Tensor x0({2, 3, 4, 8});
    rng.fill_gaussian(x0, 0.5);
    Tensor z({2, 3, 4, 8});
    rng.fill_gaussian(z);
    const std::vector<int> ts = {7, 31};

    Graph g(false);
    Val sr = g.leaf(Tensor({2, 3, 4, 8}, 0.0));
    Val xm = g.leaf(Tensor({2, 1, 4, 8}, 0.5));

    // mock returning x0 exactly -> 0
    DenoiserFn oracle = [&](Graph& gg, Val, const std::vector<int>&, Val, Val) {
        return gg.leaf(x0.clone());
    };
    CHECK(scalar(g, dm_loss(oracle, g, x0, ts, z, sr, xm, sched)) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // mock returning zeros -> rms of x0
    DenoiserFn zeros = [&](Graph& gg, Val, const std::vector<int>&, Val, Val) {
        return gg.leaf(Tensor({2, 3, 4, 8}, 0.0));
    };
    double rms0 = 0;
    for (int64_t i = 0; i < x0.numel(); ++i) rms0 += x0[i] * x0[i];
    rms0 = std::sqrt(rms0 / x0.numel());
    CHECK(scalar(g, dm_loss(zeros, g, x0, ts, z, sr, xm, sched)) ==
          doctest::Approx(rms0).epsilon(1e-12));

    // mock returning x0 + 0.1 -> exactly 0.1
    DenoiserFn biased = [&](Graph& gg, Val, const std::vector<int>&, Val, Val) {
        Tensor t = x0.clone();
        for (int64_t i = 0; i < t.numel(); ++i) t[i] += 0.1;
        return gg.leaf(std::move(t));
    };
    CHECK(scalar(g, dm_loss(biased, g, x0, ts, z, sr, xm, sched)) ==
          doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("noise-mode conversion is consistent") {
    auto sched = diffusion::make_linear_schedule(50, 1e-5, 5e-2);
    Rng rng(5);
    Tensor x0({2, 3, 4, 8});
    rng.fill_gaussian(x0, 0.5);
    Tensor z({2, 3, 4, 8});
    rng.fill_gaussian(z);
    const std::vector<int> ts = {11, 42};
    Graph g(false);
    Val sr = g.leaf(Tensor({2, 3, 4, 8}, 0.0));
    Val xm = g.leaf(Tensor({2, 1, 4, 8}, 0.5));
    // mock predicting the true noise: converted x0_hat must equal x0
    DenoiserFn true_noise = [&](Graph& gg, Val, const std::vector<int>&, Val, Val) {
        return gg.leaf(z.clone());
    };
    auto parts = train::make_dm_parts(true_noise, g, x0, ts, z, sr, xm, sched, true);
    CHECK(scalar(g, parts.dm) == doctest::Approx(0.0));
    const Tensor& xh = g.val(parts.x0_hat);
    for (int64_t i = 0; i < x0.numel(); ++i) CHECK(std::fabs(xh[i] - x0[i]) < 1e-6);
}

TEST_CASE("dm and edge losses match finite differences through a tiny denoiser") {
    auto sched = diffusion::make_linear_schedule(20, 1e-4, 5e-2);
    Rng rng(6);
    UNetConfig uc;
    uc.base = 4;
    uc.mults = {1, 2};
    uc.res_blocks = 1;
    uc.dropout = 0.0;
    uc.attn_tail = 1;
    uc.temb_dim = 8;
    uc.gdb_dilations = {1, 2};
    Mrd mrd;
    mrd.init(uc, rng);
    // the output conv is zero-initialized; nudge it so gradients are alive
    rng.fill_uniform(mrd.net.out_conv.w.value, -0.2, 0.2);

    Tensor x0({1, 3, 4, 8});
    rng.fill_gaussian(x0, 0.5);
    Tensor z({1, 3, 4, 8});
    rng.fill_gaussian(z);
    Tensor sr0({1, 3, 4, 8});
    rng.fill_gaussian(sr0, 0.3);
    Tensor xm0({1, 1, 4, 8});
    rng.fill_uniform(xm0, 0.0, 1.0);
    const std::vector<int> ts = {13};

    // gradient w.r.t. the conditioning image through dm + edge
    fd_against(
        [&](Graph& g, Val sr) {
            Val xm = g.leaf(xm0.clone());
            auto parts =
                train::make_dm_parts(mrd.denoiser(), g, x0, ts, z, sr, xm, sched, false);
            return o::add(parts.dm, edge_loss(parts.x0_hat, g.leaf(x0.clone())));
        },
        sr0, 1e-3);

    // gradient w.r.t. the mask through both conditioning paths
    fd_against(
        [&](Graph& g, Val xm) {
            Val sr = g.leaf(sr0.clone());
            auto parts =
                train::make_dm_parts(mrd.denoiser(), g, x0, ts, z, sr, xm, sched, false);
            return o::add(parts.dm, edge_loss(parts.x0_hat, g.leaf(x0.clone())));
        },
        xm0, 1e-3);
}

TEST_CASE("standalone loss gradients match finite differences") {
    Rng rng(7);
    Tensor gt({1, 2, 3, 6});
    rng.fill_gaussian(gt, 0.5);
    Tensor sr({1, 2, 3, 6});
    rng.fill_gaussian(sr, 0.5);
    fd_against([&](Graph& g, Val x) { return gradient_profile_loss(x, g.leaf(gt.clone())); }, sr);
    fd_against([&](Graph& g, Val x) { return edge_loss(x, g.leaf(gt.clone())); }, sr);
    Tensor mp({1, 1, 3, 6}), mg({1, 1, 3, 6});
    rng.fill_uniform(mp, 0.05, 0.95);
    rng.fill_uniform(mg, 0.0, 1.0);
    fd_against([&](Graph& g, Val x) { return dice_loss(x, g.leaf(mg.clone())); }, mp);
}

TEST_CASE("dice score helper agrees with the loss") {
    Rng rng(8);
    Tensor a({1, 1, 4, 4}), b({1, 1, 4, 4});
    rng.fill_uniform(a, 0.0, 1.0);
    rng.fill_uniform(b, 0.0, 1.0);
    Graph g(false);
    const double loss = scalar(g, dice_loss(g.leaf(a), g.leaf(b)));
    CHECK(dice_score(a, b) == doctest::Approx(1.0 - loss).epsilon(1e-9));
}
