#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "textsr/data/corpus.hpp"
#include "textsr/text/recognizer.hpp"
#include "textsr/train/trainer.hpp"

using namespace textsr;
using namespace textsr::text;
namespace o = textsr::ops;

namespace {

// one-hot logits (L, C) with weight `mag` on the chosen id per frame
Tensor path_logits(const std::vector<int>& path, int C, double mag = 30.0) {
    Tensor t({static_cast<int>(path.size()), C}, 0.0);
    for (size_t i = 0; i < path.size(); ++i) t[i * C + path[i]] = mag;
    return t;
}

// Independent count of CTC alignments of `target` into L frames (all paths
// through the blank-extended label).
int64_t count_alignments(const std::vector<int>& target, int L) {
    const int U = static_cast<int>(target.size());
    const int S = 2 * U + 1;
    std::vector<int> ext(S, -1);
    for (int i = 0; i < U; ++i) ext[2 * i + 1] = target[i];
    std::vector<std::vector<int64_t>> dp(L, std::vector<int64_t>(S, 0));
    dp[0][0] = 1;
    if (S > 1) dp[0][1] = 1;
    for (int t = 1; t < L; ++t)
        for (int s = 0; s < S; ++s) {
            int64_t v = dp[t - 1][s];
            if (s >= 1) v += dp[t - 1][s - 1];
            if (s >= 2 && ext[s] != -1 && ext[s] != ext[s - 2]) v += dp[t - 1][s - 2];
            dp[t][s] = v;
        }
    int64_t total = dp[L - 1][S - 1];
    if (S > 1) total += dp[L - 1][S - 2];
    return total;
}

double ctc_value(const Tensor& logits_LNC, const std::vector<std::vector<int>>& targets,
                 int blank) {
    Graph g(false);
    Val v = g.leaf(logits_LNC.clone(), false);
    return g.val(ctc_loss(v, targets, blank)).item();
}

}  // namespace

TEST_CASE("greedy decode basics") {
    Charset cs("ab");
    const int blank = cs.blank();  // id 2
    Tensor t1 = path_logits({blank, blank, blank, blank}, 3);
    CHECK(ctc_greedy_decode(t1, cs) == "");
    Tensor t2 = path_logits({0, 0, blank, 1}, 3);
    CHECK(ctc_greedy_decode(t2, cs) == "ab");
    Tensor t3 = path_logits({0, blank, 0}, 3);
    CHECK(ctc_greedy_decode(t3, cs) == "aa");
}

TEST_CASE("greedy decode idempotent under repeat collapse") {
    Rng rng(3);
    Charset cs("abcd");
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> path(12);
        for (auto& p : path) p = rng.uniform_int(0, cs.blank());
        std::vector<int> once = ctc_greedy(path_logits(path, cs.num_classes()), cs.blank());
        if (once.empty()) continue;
        std::vector<int> again = ctc_greedy(path_logits(once, cs.num_classes()), cs.blank());
        std::vector<int> manual;
        for (int id : once)
            if (manual.empty() || manual.back() != id) manual.push_back(id);
        CHECK(again == manual);
    }
}

TEST_CASE("ctc loss on a forced alignment is near zero") {
    Charset cs("ab");
    const int blank = cs.blank();
    Tensor logits({4, 1, 3}, 0.0);
    const std::vector<int> path = {0, blank, 1, blank};
    for (int t = 0; t < 4; ++t) logits[t * 3 + path[t]] = 40.0;
    const double nll = ctc_value(logits, {{0, 1}}, blank);
    CHECK(nll >= 0.0);
    CHECK(nll < 1e-6);
}

TEST_CASE("ctc loss under a uniform prior matches the combinatorial oracle") {
    Charset cs("abc");
    const int blank = cs.blank();
    const int C = cs.num_classes();
    const int L = 8;
    Tensor logits({L, 1, C}, 0.0);  // uniform after softmax
    for (auto target : std::vector<std::vector<int>>{{0}, {0, 1}, {0, 0}, {2, 1, 0}}) {
        const double nll = ctc_value(logits, {target}, blank);
        const double expect = L * std::log(static_cast<double>(C)) -
                              std::log(static_cast<double>(count_alignments(target, L)));
        CHECK(nll == doctest::Approx(expect).epsilon(1e-9));
        CHECK(nll > 0.0);
    }
}

TEST_CASE("ctc loss rejects infeasible targets") {
    Charset cs("ab");
    Tensor logits({3, 1, 3}, 0.0);
    CHECK_THROWS_AS(ctc_value(logits, {{0, 0, 0}}, cs.blank()), std::invalid_argument);
    CHECK_THROWS_AS(ctc_value(logits, {{7}}, cs.blank()), std::invalid_argument);
}

TEST_CASE("ctc gradient matches finite differences") {
    Rng rng(5);
    const int L = 6, N = 2, C = 4;
    Tensor logits({L, N, C});
    rng.fill_gaussian(logits);
    const std::vector<std::vector<int>> targets = {{0, 1}, {2, 2}};

    Graph g(true);
    Val v = g.leaf(logits.clone(), true);
    Val loss = ctc_loss(v, targets, 3);
    g.backward(loss);
    Tensor grad = g.grad(v).clone();

    const double h = 1e-6;
    for (int64_t i = 0; i < logits.numel(); ++i) {
        Tensor lp = logits.clone(), lm = logits.clone();
        lp[i] += h;
        lm[i] -= h;
        const double fd = (ctc_value(lp, targets, 3) - ctc_value(lm, targets, 3)) / (2 * h);
        CHECK(std::fabs(fd - grad[i]) / std::max({std::fabs(fd), std::fabs(grad[i]), 1e-4}) <
              1e-4);
    }
}

TEST_CASE("recognizer forward contract") {
    Rng rng(7);
    RecognizerConfig cfg;
    cfg.charset = "0123456789";
    cfg.base = 8;
    cfg.gru_hidden = 12;
    Recognizer rec;
    rec.init(cfg, rng);

    Graph g(false);
    Tensor imgs({2, 3, 32, 128});
    rng.fill_gaussian(imgs, 0.3);
    auto fwd = rec.forward(g, g.leaf(imgs));
    CHECK(g.val(fwd.logits).shape() == std::vector<int>{32, 2, 11});
    CHECK(fwd.taps.size() == 3);

    Graph g2(false);
    CHECK_THROWS_AS(rec.forward(g2, g2.leaf(Tensor({2, 1, 32, 128}))), std::invalid_argument);
    CHECK_THROWS_AS(rec.recognize(Tensor({3, 30, 128})), std::invalid_argument);

    data::DegradationParams dg;
    auto s = data::render_sample(50, "0123456789", data::builtin_fonts(), dg);
    auto [decoded, prior] = rec.recognize(s.hr);
    for (int t = 0; t < prior.probs.dim(0); ++t) {
        double rowsum = 0;
        for (int k = 0; k < prior.probs.dim(1); ++k) rowsum += prior.probs[t * 11 + k];
        CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-5));
        for (int k = 0; k < prior.probs.dim(1); ++k) CHECK(prior.probs[t * 11 + k] >= 0.0);
    }
}

TEST_CASE("feature extraction determinism and sensitivity") {
    Rng rng(9);
    RecognizerConfig cfg;
    cfg.base = 8;
    cfg.gru_hidden = 12;
    Recognizer rec;
    rec.init(cfg, rng);
    data::DegradationParams dg;
    auto s = data::render_sample(51, "0123456789", data::builtin_fonts(), dg);

    auto f1 = rec.extract_features(s.hr);
    auto f2 = rec.extract_features(s.hr);
    REQUIRE(f1.features.size() == 3);
    for (size_t i = 0; i < 3; ++i)
        for (int64_t p = 0; p < f1.features[i].numel(); ++p)
            CHECK(f1.features[i][p] == f2.features[i][p]);

    Tensor shifted = s.hr.clone();
    const int64_t hw = static_cast<int64_t>(32) * 128;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 128; ++x)
                shifted[c * hw + y * 128 + x] = s.hr[c * hw + y * 128 + std::max(0, x - 1)];
    auto f3 = rec.extract_features(shifted);
    double l1 = 0;
    for (size_t i = 0; i < 3; ++i)
        for (int64_t p = 0; p < f1.features[i].numel(); ++p)
            l1 += std::fabs(f1.features[i][p] - f3.features[i][p]);
    CHECK(l1 > 0.0);
}

TEST_CASE("perceptual loss properties and gradient") {
    Rng rng(11);
    RecognizerConfig cfg;
    cfg.base = 6;
    cfg.gru_hidden = 8;
    Recognizer rec;
    rec.init(cfg, rng);
    rec.freeze();

    Tensor a({1, 3, 4, 8});
    rng.fill_gaussian(a, 0.4);
    {
        Graph g(false);
        Val va = g.leaf(a.clone());
        Val loss = rec.perceptual_loss(g, va, va);
        CHECK(g.val(loss).item() == doctest::Approx(0.0));
    }
    Tensor b({1, 3, 4, 8});
    rng.fill_gaussian(b, 0.4);
    Graph g(true);
    Val va = g.leaf(a.clone(), true);
    Val vb = g.leaf(b.clone());
    Val loss = rec.perceptual_loss(g, va, vb);
    const double base = g.val(loss).item();
    CHECK(base >= 0.0);
    g.backward(loss);
    Tensor grad = g.grad(va).clone();

    auto eval = [&](const Tensor& x) {
        Graph gg(false);
        return gg.val(rec.perceptual_loss(gg, gg.leaf(x.clone()), gg.leaf(b.clone()))).item();
    };
    const double h = 1e-6;
    for (int64_t i = 0; i < a.numel(); ++i) {
        Tensor xp = a.clone(), xm = a.clone();
        xp[i] += h;
        xm[i] -= h;
        const double fd = (eval(xp) - eval(xm)) / (2 * h);
        const double an = grad[i];
        CHECK(std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-4}) < 1e-3);
    }
}

TEST_CASE("tp loss decreases over short pretraining") {
    data::CorpusManifest m;
    m.charset = "0123456789";
    m.count = 64;
    m.seed = 400;
    auto dir = std::filesystem::temp_directory_path() / "textsr_test_tp";
    std::filesystem::remove_all(dir);
    data::write_corpus(m, dir.string());
    auto corpus = data::load_corpus(dir.string());

    Rng rng(13);
    RecognizerConfig cfg;
    cfg.charset = m.charset;
    cfg.base = 8;
    cfg.gru_hidden = 16;
    Recognizer rec;
    rec.init(cfg, rng);

    train::RecTrainConfig tc;
    tc.iters = 200;
    tc.batch = 8;
    tc.lr = 2e-3;
    tc.seed = 5;
    tc.aug_prob = 0.0;

    auto mean_tp = [&]() {
        double total = 0;
        int count = 0;
        for (int i = 0; i < 16; ++i) {
            const auto& s = corpus.samples[i];
            Graph g(false);
            Tensor img = s.hr.reshaped({1, 3, 32, 128});
            auto fwd = rec.forward(g, g.leaf(img));
            total += g.val(rec.tp_loss(fwd.logits, {s.label})).item();
            ++count;
        }
        return total / count;
    };
    const double before = mean_tp();
    train::pretrain_recognizer(rec, corpus, tc);
    const double after = mean_tp();
    CHECK(after < before * 0.5);
    std::filesystem::remove_all(dir);
}

TEST_CASE("frozen recognizer checksum stable under training graphs") {
    Rng rng(15);
    RecognizerConfig cfg;
    cfg.base = 6;
    cfg.gru_hidden = 8;
    Recognizer rec;
    rec.init(cfg, rng);
    rec.freeze();
    const uint64_t before = rec.checksum();

    Tensor a({1, 3, 32, 128});
    rng.fill_gaussian(a, 0.2);
    Graph g(true);
    Val va = g.leaf(a, true);
    Val loss = rec.perceptual_loss(g, va, g.leaf(Tensor({1, 3, 32, 128}, 0.1)));
    g.backward(loss);
    nn::ParamMap m;
    rec.collect(m);
    AdamW opt;
    opt.step(m, g);  // frozen params carry no gradient, so no update
    CHECK(rec.checksum() == before);
}

TEST_CASE("recognizer save/load round-trips bit-exactly") {
    Rng rng(17);
    RecognizerConfig cfg;
    cfg.base = 8;
    cfg.gru_hidden = 12;
    Recognizer rec;
    rec.init(cfg, rng);
    auto path = (std::filesystem::temp_directory_path() / "textsr_rec.tsck").string();
    rec.save(path);
    Recognizer back = Recognizer::load(path);
    CHECK(back.checksum() == rec.checksum());
    CHECK(back.cfg.charset == rec.cfg.charset);
    std::filesystem::remove(path);
}
