#include "textsr/diffusion/schedule.hpp"

#include <cmath>

namespace textsr::diffusion {

namespace {

void check_t(int t, int T, const char* where) {
    if (t < 1 || t > T)
        throw std::invalid_argument(std::string(where) + ": timestep " + std::to_string(t) +
                                    " outside [1, " + std::to_string(T) + "]");
}

}  // namespace

real NoiseSchedule::beta_at(int t) const {
    check_t(t, T, "beta_at");
    return beta[t];
}

real NoiseSchedule::alpha_at(int t) const {
    check_t(t, T, "alpha_at");
    return alpha[t];
}

real NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw std::invalid_argument("alpha_bar_at: t outside [0, T]");
    return alpha_bar[t];
}

NoiseSchedule NoiseSchedule::from_betas(const std::vector<real>& betas) {
    if (betas.empty()) throw std::invalid_argument("from_betas: empty");
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.beta.assign(s.T + 1, 0.0);
    s.alpha.assign(s.T + 1, 1.0);
    s.alpha_bar.assign(s.T + 1, 1.0);
    for (int t = 1; t <= s.T; ++t) {
        const real b = betas[t - 1];
        if (b < 0.0 || b >= 1.0) throw std::invalid_argument("from_betas: beta outside [0, 1)");
        s.beta[t] = b;
        s.alpha[t] = 1.0 - b;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
}

NoiseSchedule make_linear_schedule(int T, real beta_min, real beta_max) {
    if (T < 1) throw std::invalid_argument("make_linear_schedule: T must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw std::invalid_argument("make_linear_schedule: need 0 < beta_min <= beta_max < 1");
    std::vector<real> betas(T);
    for (int t = 1; t <= T; ++t)
        betas[t - 1] = T == 1 ? beta_min
                              : beta_min + (beta_max - beta_min) *
                                               (static_cast<real>(t - 1) / (T - 1));
    return NoiseSchedule::from_betas(betas);
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& s) {
    check_t(t, s.T, "q_sample");
    check_same_shape(x0, z, "q_sample");
    const real ab = s.alpha_bar[t];
    const real c0 = std::sqrt(ab);
    const real cz = std::sqrt(1.0 - ab);
    Tensor out(x0.shape());
    const real* p0 = x0.data();
    const real* pz = z.data();
    real* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = c0 * p0[i] + cz * pz[i];
    return out;
}

Tensor reverse_step_to(const Tensor& x_t, const Tensor& x0_hat, int t, int t_prev,
                       const NoiseSchedule& s) {
    check_t(t, s.T, "reverse_step");
    if (t_prev < 0 || t_prev >= t)
        throw std::invalid_argument("reverse_step: t_prev must lie in [0, t)");
    check_same_shape(x_t, x0_hat, "reverse_step");
    const real ab_t = s.alpha_bar[t];
    const real ab_p = s.alpha_bar[t_prev];
    if (ab_t >= 1.0) return x0_hat.clone();  // zero-noise limit of the update
    const real cp = std::sqrt(ab_p);
    const real cn = std::sqrt(1.0 - ab_p) / std::sqrt(1.0 - ab_t);
    const real ct = std::sqrt(ab_t);
    Tensor out(x_t.shape());
    const real* pt = x_t.data();
    const real* p0 = x0_hat.data();
    real* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i)
        po[i] = cp * p0[i] + cn * (pt[i] - ct * p0[i]);
    return out;
}

Tensor reverse_step(const Tensor& x_t, const Tensor& x0_hat, int t, const NoiseSchedule& s) {
    return reverse_step_to(x_t, x0_hat, t, t - 1, s);
}

Tensor noise_from_x0(const Tensor& x_t, const Tensor& x0, int t, const NoiseSchedule& s) {
    check_t(t, s.T, "noise_from_x0");
    check_same_shape(x_t, x0, "noise_from_x0");
    const real ab = s.alpha_bar[t];
    if (ab >= 1.0)
        throw std::invalid_argument("noise_from_x0: alpha_bar = 1, conversion undefined");
    const real c0 = std::sqrt(ab);
    const real inv = 1.0 / std::sqrt(1.0 - ab);
    Tensor out(x_t.shape());
    const real* pt = x_t.data();
    const real* p0 = x0.data();
    real* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] = (pt[i] - c0 * p0[i]) * inv;
    return out;
}

TimestepPlan make_plan(int T, int n) {
    if (T < 1 || n < 1 || n > T)
        throw std::invalid_argument("make_plan: need 1 <= n <= T");
    TimestepPlan plan;
    int last = T + 1;
    for (int i = 0; i < n; ++i) {
        int step = static_cast<int>(std::lround(static_cast<double>(T) * (n - i) / n));
        if (step < 1) step = 1;
        if (step < last) {
            plan.steps.push_back(step);
            last = step;
        }
    }
    return plan;
}

void check_plan(const TimestepPlan& plan, int T) {
    if (plan.steps.empty()) throw std::invalid_argument("plan: empty");
    if (plan.steps.front() != T)
        throw std::invalid_argument("plan: must start at T = " + std::to_string(T));
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        if (plan.steps[i] < 1 || plan.steps[i] > T)
            throw std::invalid_argument("plan: step outside [1, T]");
        if (i && plan.steps[i] >= plan.steps[i - 1])
            throw std::invalid_argument("plan: steps must strictly decrease");
    }
}

}  // namespace textsr::diffusion
