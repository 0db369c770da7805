#include "textsr/train/trainer.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "textsr/model/losses.hpp"

namespace textsr::train {

namespace o = textsr::ops;
namespace fs = std::filesystem;

std::string LossRecord::tsv_header() { return "step\tgp\tmask\ttp\tedge\tdm\tjoint\ttotal"; }

std::string LossRecord::tsv_line() const {
    std::ostringstream os;
    os << step << "\t" << gp << "\t" << mask << "\t" << tp << "\t" << edge << "\t" << dm << "\t"
       << joint << "\t" << total;
    return os.str();
}

DmParts make_dm_parts(const model::DenoiserFn& f, Graph& g, const Tensor& x0,
                      const std::vector<int>& ts, const Tensor& z, Val x_sr, Val x_m,
                      const diffusion::NoiseSchedule& sched, bool noise_mode) {
    DmParts parts;
    parts.x_t = g.leaf(model::q_sample_batch(x0, ts, z, sched));
    parts.prediction = f(g, parts.x_t, ts, x_sr, x_m);
    if (!noise_mode) {
        parts.x0_hat = parts.prediction;
        parts.dm = o::rms(o::sub(g.leaf(x0), parts.prediction));
    } else {
        parts.dm = o::rms(o::sub(g.leaf(z), parts.prediction));
        const int n = x0.dim(0), c = x0.dim(1);
        Tensor cz({n, c}), inv_c0({n, c});
        for (int ni = 0; ni < n; ++ni) {
            const real ab = sched.alpha_bar_at(ts[ni]);
            for (int ci = 0; ci < c; ++ci) {
                cz[static_cast<int64_t>(ni) * c + ci] = std::sqrt(1.0 - ab);
                inv_c0[static_cast<int64_t>(ni) * c + ci] = 1.0 / std::sqrt(ab);
            }
        }
        Val noise_part = o::mul_nc(parts.prediction, g.leaf(cz));
        parts.x0_hat = o::mul_nc(o::sub(parts.x_t, noise_part), g.leaf(inv_c0));
    }
    return parts;
}

Trainer::Trainer(ModelBundle& models, const data::Corpus& corpus)
    : m_(models), corpus_(corpus), rng_(models.cfg.seed) {
    if (corpus_.empty()) throw std::invalid_argument("Trainer: empty corpus");
    opt.lr = m_.cfg.lr;
    opt.weight_decay = m_.cfg.weight_decay;
    opt.clip_norm = m_.cfg.clip_norm;
    lr_up_cache_.resize(corpus_.size());
}

Trainer::Batch Trainer::sample_batch() {
    const int B = m_.cfg.batch;
    Batch b;
    b.lr_up = Tensor({B, 3, data::kHrH, data::kHrW});
    b.hr = Tensor({B, 3, data::kHrH, data::kHrW});
    b.mask_gt = Tensor({B, 1, data::kHrH, data::kHrW});
    const int64_t img = static_cast<int64_t>(3) * data::kHrH * data::kHrW;
    const int64_t mimg = static_cast<int64_t>(data::kHrH) * data::kHrW;
    for (int i = 0; i < B; ++i) {
        const int idx = rng_.uniform_int(0, static_cast<int>(corpus_.size()) - 1);
        const data::SRSample& s = corpus_.samples[idx];
        if (lr_up_cache_[idx].empty())
            lr_up_cache_[idx] = data::bicubic_resize(s.lr, data::kHrH, data::kHrW);
        std::copy(lr_up_cache_[idx].data(), lr_up_cache_[idx].data() + img,
                  b.lr_up.data() + i * img);
        std::copy(s.hr.data(), s.hr.data() + img, b.hr.data() + i * img);
        std::copy(s.mask_gt.data(), s.mask_gt.data() + mimg, b.mask_gt.data() + i * mimg);
        b.labels.push_back(s.label);
    }
    return b;
}

LossRecord Trainer::train_step() {
    const TrainConfig& cfg = m_.cfg;
    Batch batch = sample_batch();
    const int B = cfg.batch;

    Graph g(true);
    g.rng = &rng_;
    Val lr_up = g.leaf(batch.lr_up);
    Val hr = g.leaf(batch.hr);
    Val mask_gt = g.leaf(batch.mask_gt);

    model::Tem::Output tem_out = m_.tem.forward(g, lr_up);
    Val x_sr = tem_out.x_sr;
    Val x_m = cfg.no_mask_branch
                  ? g.leaf(Tensor({B, 1, data::kHrH, data::kHrW}, 0.5))
                  : tem_out.x_m;

    // TEM losses
    Val gp = model::gradient_profile_loss(x_sr, hr);
    Val mask_loss{};
    if (!cfg.no_mask_branch) mask_loss = model::dice_loss(tem_out.x_m, mask_gt);
    Val tp = m_.recognizer.tp_loss(tem_out.prior_logits, batch.labels);

    // residual target is a constant: no gradient flows into the
    // enhancement branch through the corruption path
    Tensor x_res(batch.hr.shape());
    {
        const Tensor& sr_val = g.val(x_sr);
        for (int64_t i = 0; i < x_res.numel(); ++i) x_res[i] = batch.hr[i] - sr_val[i];
    }

    // per-sample timestep, then the noise field, in a fixed draw order
    std::vector<int> ts(B);
    for (int i = 0; i < B; ++i) ts[i] = rng_.uniform_int(1, cfg.T);
    Tensor z({B, 3, data::kHrH, data::kHrW});
    rng_.fill_gaussian(z);

    DmParts dm_parts;
    if (cfg.plain_unet) {
        // regression mode: no corruption, fixed timestep input
        std::vector<int> ones(B, 1);
        dm_parts.x_t = g.leaf(Tensor({B, 3, data::kHrH, data::kHrW}, 0.0));
        dm_parts.prediction = m_.mrd.denoise(g, dm_parts.x_t, ones, x_sr, x_m);
        dm_parts.x0_hat = dm_parts.prediction;
        dm_parts.dm = o::rms(o::sub(g.leaf(x_res), dm_parts.prediction));
    } else {
        dm_parts = make_dm_parts(m_.mrd.denoiser(), g, x_res, ts, z, x_sr, x_m, m_.sched,
                                 cfg.noise_prediction);
    }
    Val edge = model::edge_loss(dm_parts.x0_hat, g.leaf(x_res));

    Val joint{};
    if (!cfg.no_joint_loss)
        joint = m_.recognizer.perceptual_loss(g, o::add(x_sr, dm_parts.x0_hat), hr);

    Val total = o::add(tp, o::add(edge, dm_parts.dm));
    if (cfg.lambda_gp > 0) total = o::add(total, o::scale(gp, cfg.lambda_gp));
    if (mask_loss.ok() && cfg.lambda_mask > 0)
        total = o::add(total, o::scale(mask_loss, cfg.lambda_mask));
    if (joint.ok() && cfg.lambda_joint > 0)
        total = o::add(total, o::scale(joint, cfg.lambda_joint));

    LossRecord rec;
    rec.step = iter_ + 1;
    rec.gp = g.val(gp).item();
    rec.mask = mask_loss.ok() ? g.val(mask_loss).item() : 0.0;
    rec.tp = g.val(tp).item();
    rec.edge = g.val(edge).item();
    rec.dm = g.val(dm_parts.dm).item();
    rec.joint = joint.ok() ? g.val(joint).item() : 0.0;
    rec.total = g.val(total).item();
    if (!std::isfinite(rec.total)) {
        std::ostringstream os;
        os << "train_step: non-finite loss at step " << rec.step << " [" << rec.tsv_line() << "]";
        throw std::runtime_error(os.str());
    }

    g.backward(total);
    nn::ParamMap params = m_.trainable_params();
    opt.step(params, g);

    ++iter_;
    history_.push_back(rec);
    return rec;
}

LossRecord Trainer::run_training(const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "train_log.tsv",
                      iter_ == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("run_training: cannot write train_log.tsv");
    if (iter_ == 0) {
        if (m_.cfg.no_mask_branch) log << "# mask=disabled\n";
        log << LossRecord::tsv_header() << "\n";
    }
    LossRecord last;
    while (iter_ < m_.cfg.iters) {
        last = train_step();
        if (last.step % m_.cfg.log_every == 0) log << last.tsv_line() << "\n";
        if (last.step % 50 == 0) log.flush();
        if (m_.cfg.checkpoint_every > 0 && last.step % m_.cfg.checkpoint_every == 0 &&
            last.step < m_.cfg.iters) {
            TrainerState st{iter_, rng_.save_state(), tail_text()};
            save_checkpoint((fs::path(out_dir) / ("ckpt_" + std::to_string(last.step) + ".tsck"))
                                .string(),
                            m_, &opt, st);
        }
    }
    TrainerState st{iter_, rng_.save_state(), tail_text()};
    save_checkpoint((fs::path(out_dir) / "checkpoint.tsck").string(), m_, &opt, st);
    return last;
}

std::string Trainer::tail_text(size_t keep) const {
    std::ostringstream os;
    const size_t start = history_.size() > keep ? history_.size() - keep : 0;
    for (size_t i = start; i < history_.size(); ++i) os << history_[i].tsv_line() << "\n";
    return os.str();
}

void Trainer::resume_from(const std::string& checkpoint_path) {
    TrainerState st;
    load_checkpoint(checkpoint_path, m_, &opt, &st);
    // the bundle may have been empty before the load; re-derive the
    // optimizer settings from the restored config
    opt.lr = m_.cfg.lr;
    opt.weight_decay = m_.cfg.weight_decay;
    opt.clip_norm = m_.cfg.clip_norm;
    iter_ = st.iteration;
    rng_.load_state(st.rng_state);
    history_.clear();
    std::istringstream is(st.loss_tail);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        LossRecord r;
        ls >> r.step >> r.gp >> r.mask >> r.tp >> r.edge >> r.dm >> r.joint >> r.total;
        history_.push_back(r);
    }
}

// --------------------------------------------------------------- recognizer

real pretrain_recognizer(text::Recognizer& rec, const data::Corpus& corpus,
                         const RecTrainConfig& cfg, bool verbose) {
    if (corpus.empty()) throw std::invalid_argument("pretrain_recognizer: empty corpus");
    Rng rng(cfg.seed);
    AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    nn::ParamMap params;
    rec.collect(params);
    real avg = 0;
    for (int step = 1; step <= cfg.iters; ++step) {
        Tensor imgs({cfg.batch, 3, data::kHrH, data::kHrW});
        std::vector<std::vector<int>> targets;
        const int64_t img = static_cast<int64_t>(3) * data::kHrH * data::kHrW;
        for (int i = 0; i < cfg.batch; ++i) {
            const data::SRSample& s =
                corpus.samples[rng.uniform_int(0, static_cast<int>(corpus.size()) - 1)];
            Tensor x = s.hr;
            if (rng.uniform() < cfg.aug_prob) {
                const real sigma = rng.uniform(0.1, cfg.aug_blur_max);
                x = data::gaussian_blur(x, sigma);
                x = data::add_gaussian_noise(x, cfg.aug_noise * 2.0, rng);
            }
            std::copy(x.data(), x.data() + img, imgs.data() + i * img);
            targets.push_back(rec.charset.encode(s.label));
        }
        Graph g(true);
        g.rng = &rng;
        auto fwd = rec.forward(g, g.leaf(std::move(imgs)));
        Val loss = text::ctc_loss(fwd.logits, targets, rec.charset.blank());
        const real lv = g.val(loss).item();
        if (!std::isfinite(lv))
            throw std::runtime_error("pretrain_recognizer: non-finite loss at step " +
                                     std::to_string(step));
        g.backward(loss);
        opt.step(params, g);
        avg = step == 1 ? lv : 0.98 * avg + 0.02 * lv;
        if (verbose && step % cfg.log_every == 0)
            std::printf("[rec] step %d  ctc %.4f  (ema %.4f)\n", step, lv, avg);
    }
    return avg;
}

real recognizer_accuracy(const text::Recognizer& rec, const data::Corpus& corpus, bool use_hr) {
    if (corpus.empty()) throw std::invalid_argument("recognizer_accuracy: empty corpus");
    int correct = 0;
    for (const auto& s : corpus.samples) {
        Tensor img = use_hr ? s.hr : data::bicubic_resize(s.lr, data::kHrH, data::kHrW);
        auto [decoded, prior] = rec.recognize(img);
        std::string want = s.label, got = decoded;
        for (auto& c : want) c = static_cast<char>(std::tolower(c));
        for (auto& c : got) c = static_cast<char>(std::tolower(c));
        correct += want == got;
    }
    return static_cast<real>(correct) / corpus.size();
}

}  // namespace textsr::train
