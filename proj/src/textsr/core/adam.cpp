#include "textsr/core/adam.hpp"

#include <cmath>

namespace textsr {

real AdamW::step(const nn::ParamMap& params, Graph& g) {
    // Global norm over the gradients present this step.
    real sq = 0.0;
    for (const auto& [name, p] : params) {
        const Tensor* gt = g.param_grad(*p);
        if (!gt) continue;
        const real* pg = gt->data();
        for (int64_t i = 0, n = gt->numel(); i < n; ++i) sq += pg[i] * pg[i];
    }
    const real norm = std::sqrt(sq);
    real scale = 1.0;
    if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;

    ++t_;
    const real bc1 = 1.0 - std::pow(beta1, static_cast<real>(t_));
    const real bc2 = 1.0 - std::pow(beta2, static_cast<real>(t_));
    for (auto& [name, p] : params) {
        const Tensor* gt = g.param_grad(*p);
        if (!gt) continue;
        Moments& mo = state_[name];
        if (mo.m.empty()) {
            mo.m = Tensor(p->value.shape(), 0.0);
            mo.v = Tensor(p->value.shape(), 0.0);
        }
        real* pm = mo.m.data();
        real* pv = mo.v.data();
        real* pw = p->value.data();
        const real* pg = gt->data();
        const int64_t n = p->value.numel();
#pragma omp parallel for schedule(static) if (n > 32768)
        for (int64_t i = 0; i < n; ++i) {
            const real gi = pg[i] * scale;
            pm[i] = beta1 * pm[i] + (1.0 - beta1) * gi;
            pv[i] = beta2 * pv[i] + (1.0 - beta2) * gi * gi;
            const real mhat = pm[i] / bc1;
            const real vhat = pv[i] / bc2;
            pw[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * pw[i]);
        }
    }
    return norm;
}

std::map<std::string, Tensor> AdamW::export_state() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, mo] : state_) {
        out["m." + name] = mo.m;
        out["v." + name] = mo.v;
    }
    return out;
}

void AdamW::import_state(const std::map<std::string, Tensor>& s, int64_t t) {
    t_ = t;
    state_.clear();
    for (const auto& [name, tensor] : s) {
        if (name.rfind("m.", 0) == 0)
            state_[name.substr(2)].m = tensor.clone();
        else if (name.rfind("v.", 0) == 0)
            state_[name.substr(2)].v = tensor.clone();
        else
            throw std::runtime_error("AdamW::import_state: unexpected key " + name);
    }
}

}  // namespace textsr
