#include "textsr/pipeline/infer.hpp"

#include <algorithm>
#include <cmath>

#include "textsr/data/image.hpp"

namespace textsr::pipeline {

namespace o = textsr::ops;
using diffusion::TimestepPlan;

namespace {

// One reverse-diffusion trajectory over a batch, everything as plain
// tensors (inference mode, fresh graph per network call).
std::vector<Tensor> run_plan(const train::ModelBundle& m, const Tensor& x_sr_b,
                             const Tensor& x_m_b, const TimestepPlan& plan, uint64_t seed,
                             int64_t first_index, const model::DenoiserFn* override_f) {
    const int B = x_sr_b.dim(0);
    const auto& sched = m.sched;
    diffusion::check_plan(plan, sched.T);

    Tensor x_t({B, 3, data::kHrH, data::kHrW});
    const int64_t per = x_t.numel() / B;
    for (int i = 0; i < B; ++i) {
        Rng rng(seed + static_cast<uint64_t>(first_index + i));
        Tensor z({3, data::kHrH, data::kHrW});
        rng.fill_gaussian(z);
        std::copy(z.data(), z.data() + per, x_t.data() + i * per);
    }

    model::DenoiserFn f = override_f ? *override_f : m.mrd.denoiser();

    if (m.cfg.plain_unet) {
        // regression mode: single pass, no diffusion trajectory
        Graph g(false);
        Val pred = f(g, g.leaf(Tensor({B, 3, data::kHrH, data::kHrW}, 0.0)),
                     std::vector<int>(B, 1), g.leaf(x_sr_b), g.leaf(x_m_b));
        Tensor x0 = g.val(pred).clone();
        std::vector<Tensor> outs;
        for (int i = 0; i < B; ++i) outs.push_back(x0.slice0(i, 1).clone());
        return outs;
    }

    for (int pi = 0; pi < plan.n(); ++pi) {
        const int t = plan.steps[pi];
        const int t_prev = pi + 1 < plan.n() ? plan.steps[pi + 1] : 0;
        Graph g(false);
        std::vector<int> ts(B, t);
        Val pred = f(g, g.leaf(x_t), ts, g.leaf(x_sr_b), g.leaf(x_m_b));
        Tensor x0_hat;
        if (!m.cfg.noise_prediction) {
            x0_hat = g.val(pred).clone();
        } else {
            x0_hat = model::x0_from_noise(x_t, g.val(pred), t, sched);
        }
        x_t = diffusion::reverse_step_to(x_t, x0_hat, t, t_prev, sched);
    }

    std::vector<Tensor> outs;
    for (int i = 0; i < B; ++i) outs.push_back(x_t.slice0(i, 1).clone());
    return outs;
}

}  // namespace

std::vector<Tensor> infer_many(const train::ModelBundle& models,
                               const std::vector<Tensor>& inputs, const TimestepPlan& plan,
                               uint64_t seed, bool cascade, int batch_size,
                               const model::DenoiserFn* override_f) {
    if (inputs.empty()) return {};
    if (batch_size < 1) throw std::invalid_argument("infer_many: batch_size >= 1");
    std::vector<Tensor> results(inputs.size());
    for (size_t start = 0; start < inputs.size(); start += batch_size) {
        const int B = static_cast<int>(std::min<size_t>(batch_size, inputs.size() - start));
        Tensor cond({B, 3, data::kHrH, data::kHrW});
        const int64_t per = cond.numel() / B;
        for (int i = 0; i < B; ++i) {
            const Tensor& in = inputs[start + i];
            Tensor up;
            if (cascade) {
                if (in.shape() != std::vector<int>{3, data::kHrH, data::kHrW})
                    throw std::invalid_argument("cascade mode wants (3,32,128) SR inputs");
                up = in.clone();
            } else {
                if (in.shape() != std::vector<int>{3, data::kLrH, data::kLrW})
                    throw std::invalid_argument("full mode wants (3,16,64) LR inputs");
                up = data::bicubic_resize(in, data::kHrH, data::kHrW);
            }
            std::copy(up.data(), up.data() + per, cond.data() + i * per);
        }

        Tensor x_sr_b, x_m_b;
        {
            Graph g(false);
            Val cond_leaf = g.leaf(cond);
            if (cascade) {
                x_sr_b = cond;  // external SR output passes through untouched
                x_m_b = g.val(models.tem.mask_forward(g, cond_leaf)).clone();
            } else {
                auto out = models.tem.forward(g, cond_leaf);
                x_sr_b = g.val(out.x_sr).clone();
                x_m_b = g.val(out.x_m).clone();
            }
            if (models.cfg.no_mask_branch) x_m_b = Tensor({B, 1, data::kHrH, data::kHrW}, 0.5);
        }

        std::vector<Tensor> x0s = run_plan(models, x_sr_b, x_m_b, plan, seed,
                                           static_cast<int64_t>(start), override_f);
        for (int i = 0; i < B; ++i) {
            Tensor sr({3, data::kHrH, data::kHrW});
            const real* psr = x_sr_b.data() + i * per;
            const real* px0 = x0s[i].data();
            for (int64_t p = 0; p < per; ++p)
                sr[p] = std::clamp<real>(psr[p] + px0[p], -1.0, 1.0);
            results[start + i] = std::move(sr);
        }
    }
    return results;
}

Tensor infer_one(const train::ModelBundle& models, const InferenceRequest& req,
                 const model::DenoiserFn* override_f) {
    auto out = infer_many(models, {req.input}, req.plan, req.seed, req.cascade, 1, override_f);
    return out[0];
}

}  // namespace textsr::pipeline
