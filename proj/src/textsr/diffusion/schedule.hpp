#pragma once

#include <vector>

#include "textsr/core/tensor.hpp"

namespace textsr::diffusion {

// Precomputed noise schedule. beta/alpha are indexed 1..T (slot 0 unused);
// alpha_bar has T+1 entries with the alpha_bar[0] = 1 sentinel so a reverse
// step targeting the clean state is well defined.
struct NoiseSchedule {
    int T = 0;
    std::vector<real> beta;       // size T+1, beta[0] = 0
    std::vector<real> alpha;      // size T+1, alpha[0] = 1
    std::vector<real> alpha_bar;  // size T+1, alpha_bar[0] = 1

    real beta_at(int t) const;
    real alpha_at(int t) const;
    real alpha_bar_at(int t) const;  // accepts 0..T

    // Builds from an explicit beta array (1-based semantics, betas.size() = T).
    // Permits beta = 0, which make_linear_schedule does not.
    static NoiseSchedule from_betas(const std::vector<real>& betas);
};

// Linear beta ramp from beta_min to beta_max inclusive over t = 1..T.
NoiseSchedule make_linear_schedule(int T, real beta_min, real beta_max);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z
Tensor q_sample(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& s);

// Deterministic reverse mean:
//   sqrt(abar_{t_prev}) x0_hat + sqrt(1-abar_{t_prev}) (x_t - sqrt(abar_t) x0_hat)/sqrt(1-abar_t)
// reverse_step uses t_prev = t-1; reverse_step_to takes an arbitrary earlier
// target (spaced sampling jumps), t_prev in [0, t). At abar_t = 1 the noise
// term vanishes and the result is defined as x0_hat.
Tensor reverse_step(const Tensor& x_t, const Tensor& x0_hat, int t, const NoiseSchedule& s);
Tensor reverse_step_to(const Tensor& x_t, const Tensor& x0_hat, int t, int t_prev,
                       const NoiseSchedule& s);

// Inverts q_sample: z = (x_t - sqrt(abar_t) x0) / sqrt(1 - abar_t).
// Throws when abar_t = 1 (no noise to extract).
Tensor noise_from_x0(const Tensor& x_t, const Tensor& x0, int t, const NoiseSchedule& s);

// Spaced sampling plan: steps_i = round(T (n-i)/n) for i = 0..n-1, clamped
// to >= 1, deduplicated, strictly decreasing from T. The trailing reverse
// step jumps to the clean state (alpha_bar index 0).
struct TimestepPlan {
    std::vector<int> steps;
    int n() const { return static_cast<int>(steps.size()); }
};

TimestepPlan make_plan(int T, int n);

// Validation used by inference entry points.
void check_plan(const TimestepPlan& plan, int T);

}  // namespace textsr::diffusion
