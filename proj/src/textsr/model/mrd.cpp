#include "textsr/model/mrd.hpp"

#include <cmath>

namespace textsr::model {

namespace o = textsr::ops;

Val Mrd::denoise(Graph& g, Val x_t, const std::vector<int>& ts, Val x_sr, Val x_m) const {
    const Tensor& xt = g.val(x_t);
    if (xt.ndim() != 4 || xt.dim(1) != 3)
        throw std::invalid_argument("Mrd::denoise: x_t must be (N,3,H,W)");
    check_same_shape(g.val(x_t), g.val(x_sr), "Mrd::denoise x_sr");
    if (g.val(x_m).dim(1) != 1) throw std::invalid_argument("Mrd::denoise: x_m must be (N,1,H,W)");
    Val inp = o::concat_ch({x_t, x_sr, x_m});
    return net.forward(g, inp, ts, x_m);
}

DenoiserFn Mrd::denoiser() const {
    return [this](Graph& g, Val x_t, const std::vector<int>& ts, Val x_sr, Val x_m) {
        return denoise(g, x_t, ts, x_sr, x_m);
    };
}

Tensor q_sample_batch(const Tensor& x0, const std::vector<int>& ts, const Tensor& z,
                      const diffusion::NoiseSchedule& sched) {
    check_same_shape(x0, z, "q_sample_batch");
    if (x0.ndim() != 4 || static_cast<int>(ts.size()) != x0.dim(0))
        throw std::invalid_argument("q_sample_batch: batch mismatch");
    Tensor out(x0.shape());
    const int64_t per = x0.numel() / x0.dim(0);
    for (int n = 0; n < x0.dim(0); ++n) {
        const real ab = sched.alpha_bar_at(ts[n]);
        if (ts[n] < 1) throw std::invalid_argument("q_sample_batch: t out of range");
        const real c0 = std::sqrt(ab);
        const real cz = std::sqrt(1.0 - ab);
        const real* p0 = x0.data() + n * per;
        const real* pz = z.data() + n * per;
        real* po = out.data() + n * per;
        for (int64_t i = 0; i < per; ++i) po[i] = c0 * p0[i] + cz * pz[i];
    }
    return out;
}

Val dm_loss(const DenoiserFn& f, Graph& g, const Tensor& x0, const std::vector<int>& ts,
            const Tensor& z, Val x_sr, Val x_m, const diffusion::NoiseSchedule& sched) {
    Tensor x_t = q_sample_batch(x0, ts, z, sched);
    Val x_t_leaf = g.leaf(std::move(x_t));
    Val pred = f(g, x_t_leaf, ts, x_sr, x_m);
    Val target = g.leaf(x0);
    return o::rms(o::sub(target, pred));
}

NoisePredResult dm_loss_noise_mode(const DenoiserFn& f, Graph& g, const Tensor& x0,
                                   const std::vector<int>& ts, const Tensor& z, Val x_sr,
                                   Val x_m, const diffusion::NoiseSchedule& sched) {
    Tensor x_t = q_sample_batch(x0, ts, z, sched);
    const int n = x0.dim(0), c = x0.dim(1);
    Val x_t_leaf = g.leaf(x_t);
    Val z_hat = f(g, x_t_leaf, ts, x_sr, x_m);
    Val z_target = g.leaf(z);
    NoisePredResult out;
    out.loss = o::rms(o::sub(z_target, z_hat));
    // x0_hat = (x_t - sqrt(1-abar_t) z_hat) / sqrt(abar_t), per sample
    Tensor cz({n, c}), inv_c0({n, c});
    for (int ni = 0; ni < n; ++ni) {
        const real ab = sched.alpha_bar_at(ts[ni]);
        for (int ci = 0; ci < c; ++ci) {
            cz[static_cast<int64_t>(ni) * c + ci] = std::sqrt(1.0 - ab);
            inv_c0[static_cast<int64_t>(ni) * c + ci] = 1.0 / std::sqrt(ab);
        }
    }
    Val noise_part = o::mul_nc(z_hat, g.leaf(cz));
    out.x0_hat = o::mul_nc(o::sub(x_t_leaf, noise_part), g.leaf(inv_c0));
    return out;
}

Tensor x0_from_noise(const Tensor& x_t, const Tensor& z_hat, int t,
                     const diffusion::NoiseSchedule& sched) {
    check_same_shape(x_t, z_hat, "x0_from_noise");
    const real ab = sched.alpha_bar_at(t);
    const real cz = std::sqrt(1.0 - ab);
    const real inv = 1.0 / std::sqrt(ab);
    Tensor out(x_t.shape());
    for (int64_t i = 0, n = out.numel(); i < n; ++i) out[i] = (x_t[i] - cz * z_hat[i]) * inv;
    return out;
}

}  // namespace textsr::model
