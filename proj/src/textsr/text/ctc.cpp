#include "textsr/text/ctc.hpp"

#include <cmath>
#include <limits>

namespace textsr::text {

namespace {

constexpr real kNegInf = -std::numeric_limits<real>::infinity();

real log_add(real a, real b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const real m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Per-sample forward-backward on log-softmax probabilities lp (L, C).
// Fills grad_lp (L, C) with dNLL/dlp and returns the NLL.
real ctc_single(const real* lp, int L, int C, const std::vector<int>& target, int blank,
                real* grad_lp) {
    const int U = static_cast<int>(target.size());
    const int S = 2 * U + 1;
    std::vector<int> ext(S, blank);
    for (int i = 0; i < U; ++i) {
        if (target[i] < 0 || target[i] >= C || target[i] == blank)
            throw std::invalid_argument("ctc: target id out of range");
        ext[2 * i + 1] = target[i];
    }
    // feasibility: minimal frames = U + #adjacent repeats
    int min_frames = U;
    for (int i = 1; i < U; ++i) min_frames += target[i] == target[i - 1];
    if (min_frames > L)
        throw std::invalid_argument("ctc: target cannot be aligned within sequence length");

    auto allow_skip = [&](int s) {
        return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
    };

    std::vector<real> alpha(static_cast<size_t>(L) * S, kNegInf);
    std::vector<real> beta(static_cast<size_t>(L) * S, kNegInf);
    alpha[0 * S + 0] = lp[0 * C + ext[0]];
    if (S > 1) alpha[0 * S + 1] = lp[0 * C + ext[1]];
    for (int t = 1; t < L; ++t)
        for (int s = 0; s < S; ++s) {
            real a = alpha[(t - 1) * S + s];
            if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
            if (allow_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
            alpha[t * S + s] = a == kNegInf ? kNegInf : a + lp[t * C + ext[s]];
        }
    real log_p = alpha[(L - 1) * S + S - 1];
    if (S > 1) log_p = log_add(log_p, alpha[(L - 1) * S + S - 2]);
    if (log_p == kNegInf)
        throw std::invalid_argument("ctc: no feasible alignment");

    beta[(L - 1) * S + S - 1] = lp[(L - 1) * C + ext[S - 1]];
    if (S > 1) beta[(L - 1) * S + S - 2] = lp[(L - 1) * C + ext[S - 2]];
    for (int t = L - 2; t >= 0; --t)
        for (int s = S - 1; s >= 0; --s) {
            real b = beta[(t + 1) * S + s];
            if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1]);
            if (s + 2 < S && ext[s + 2] != blank && ext[s + 2] != ext[s])
                b = log_add(b, beta[(t + 1) * S + s + 2]);
            beta[t * S + s] = b == kNegInf ? kNegInf : b + lp[t * C + ext[s]];
        }

    // posterior over classes per frame; dNLL/dlp[t][k] = -post[t][k]
    for (int t = 0; t < L; ++t) {
        for (int k = 0; k < C; ++k) grad_lp[t * C + k] = 0.0;
        for (int s = 0; s < S; ++s) {
            const real ab = alpha[t * S + s] + beta[t * S + s] - lp[t * C + ext[s]];
            if (ab == kNegInf) continue;
            grad_lp[t * C + ext[s]] += std::exp(ab - log_p);
        }
        for (int k = 0; k < C; ++k) grad_lp[t * C + k] = -grad_lp[t * C + k];
    }
    return -log_p;
}

}  // namespace

Val ctc_loss(Val logits, const std::vector<std::vector<int>>& targets, int blank) {
    Graph& g = *logits.g;
    const Tensor& lt = g.val(logits);
    if (lt.ndim() != 3) throw std::invalid_argument("ctc_loss: logits must be (L,N,C)");
    const int L = lt.dim(0), N = lt.dim(1), C = lt.dim(2);
    if (static_cast<int>(targets.size()) != N)
        throw std::invalid_argument("ctc_loss: batch size mismatch");
    if (blank < 0 || blank >= C) throw std::invalid_argument("ctc_loss: bad blank id");

    // log-softmax per (t, n)
    Tensor lp({L, N, C});
    for (int t = 0; t < L; ++t)
        for (int n = 0; n < N; ++n) {
            const real* row = lt.data() + (static_cast<int64_t>(t) * N + n) * C;
            real* out = lp.data() + (static_cast<int64_t>(t) * N + n) * C;
            real mx = row[0];
            for (int k = 1; k < C; ++k) mx = std::max(mx, row[k]);
            real s = 0;
            for (int k = 0; k < C; ++k) s += std::exp(row[k] - mx);
            const real lse = mx + std::log(s);
            for (int k = 0; k < C; ++k) out[k] = row[k] - lse;
        }

    // per-sample forward-backward; grad w.r.t. lp gathered per sample
    Tensor grad_lp({L, N, C}, 0.0);
    real total = 0.0;
    std::vector<real> lp_one(static_cast<size_t>(L) * C);
    std::vector<real> gl_one(static_cast<size_t>(L) * C);
    for (int n = 0; n < N; ++n) {
        for (int t = 0; t < L; ++t)
            for (int k = 0; k < C; ++k)
                lp_one[t * C + k] = lp[(static_cast<int64_t>(t) * N + n) * C + k];
        total += ctc_single(lp_one.data(), L, C, targets[n], blank, gl_one.data());
        for (int t = 0; t < L; ++t)
            for (int k = 0; k < C; ++k)
                grad_lp[(static_cast<int64_t>(t) * N + n) * C + k] = gl_one[t * C + k];
    }
    const real mean_nll = total / N;

    const int self = g.size();
    const int il = logits.id;
    int id = g.add_node(Tensor::scalar(mean_nll), {il}, [self, il, L, N, C, lp, grad_lp](Graph& gg) {
        const real gscale = gg.grad(self)[0] / N;
        // chain through log-softmax: dlogits = softmax * sum_k(dlp_k) + dlp
        Tensor gx({L, N, C});
        for (int t = 0; t < L; ++t)
            for (int n = 0; n < N; ++n) {
                const real* lpo = lp.data() + (static_cast<int64_t>(t) * N + n) * C;
                const real* go = grad_lp.data() + (static_cast<int64_t>(t) * N + n) * C;
                real* out = gx.data() + (static_cast<int64_t>(t) * N + n) * C;
                real gsum = 0;
                for (int k = 0; k < C; ++k) gsum += go[k];
                for (int k = 0; k < C; ++k)
                    out[k] = gscale * (go[k] - std::exp(lpo[k]) * gsum);
            }
        gg.accumulate_grad(il, std::move(gx));
    });
    return Val{&g, id};
}

std::vector<int> ctc_greedy(const Tensor& probs_or_logits, int blank) {
    if (probs_or_logits.ndim() != 2) throw std::invalid_argument("ctc_greedy: expects (L,C)");
    const int L = probs_or_logits.dim(0), C = probs_or_logits.dim(1);
    std::vector<int> out;
    int prev = -1;
    for (int t = 0; t < L; ++t) {
        const real* row = probs_or_logits.data() + static_cast<int64_t>(t) * C;
        int best = 0;
        for (int k = 1; k < C; ++k)
            if (row[k] > row[best]) best = k;
        if (best != blank && best != prev) out.push_back(best);
        prev = best;
    }
    return out;
}

std::string ctc_greedy_decode(const Tensor& probs_or_logits, const Charset& cs) {
    return cs.decapsulate(ctc_greedy(probs_or_logits, cs.blank()));
}

}  // namespace textsr::text
