#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "textsr/train/trainer.hpp"

using namespace textsr;
using namespace textsr::train;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    std::string dir;
    data::Corpus corpus;
    std::string rec_path;

    Fixture() {
        dir = (fs::temp_directory_path() / "textsr_trainer_fix").string();
        fs::remove_all(dir);
        fs::create_directories(dir);
        data::CorpusManifest m;
        m.charset = "0123456789";
        m.count = 12;
        m.seed = 900;
        data::write_corpus(m, dir + "/corpus");
        corpus = data::load_corpus(dir + "/corpus");
        Rng rng(4);
        text::RecognizerConfig rc;
        rc.charset = m.charset;
        rc.base = 6;
        rc.gru_hidden = 8;
        text::Recognizer rec;
        rec.init(rc, rng);
        rec_path = dir + "/rec.tsck";
        rec.save(rec_path);
    }
    ~Fixture() { fs::remove_all(dir); }

    TrainConfig tiny_cfg() const {
        TrainConfig c;
        c.T = 20;
        c.batch = 2;
        c.iters = 4;
        c.lr = 1e-3;
        c.seed = 11;
        c.tem.channels = 8;
        c.tem.blocks = 1;
        c.tem.mask_channels = 8;
        c.unet.base = 6;
        c.unet.mults = {1, 2};
        c.unet.res_blocks = 1;
        c.unet.dropout = 0.1;
        c.unet.attn_tail = 1;
        c.unet.temb_dim = 12;
        c.unet.gdb_dilations = {1, 2};
        c.checkpoint_every = 2;
        return c;
    }
};

}  // namespace

TEST_CASE("train config round-trips through text") {
    Fixture f;
    TrainConfig c = f.tiny_cfg();
    c.no_joint_loss = true;
    c.lambda_mask = 2.5;
    TrainConfig back = TrainConfig::from_text(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK(back.no_joint_loss);
    CHECK(back.unet.mults == std::vector<int>{1, 2});

    TrainConfig abl = f.tiny_cfg();
    abl.apply_ablation("no_mask_branch,noise_prediction");
    CHECK(abl.no_mask_branch);
    CHECK(abl.noise_prediction);
    CHECK_THROWS_AS(abl.apply_ablation("bogus"), std::invalid_argument);
}

TEST_CASE("one train step returns the full loss record and moves both modules") {
    Fixture f;
    ModelBundle m;
    build_models(f.tiny_cfg(), f.rec_path, m);
    const uint64_t rec_sum = m.recognizer.checksum();

    nn::ParamMap params = m.trainable_params();
    std::map<std::string, Tensor> before;
    for (auto& [name, p] : params) before[name] = p->value.clone();

    Trainer tr(m, f.corpus);
    LossRecord r = tr.train_step();
    CHECK(r.step == 1);
    CHECK(std::isfinite(r.gp));
    CHECK(std::isfinite(r.mask));
    CHECK(std::isfinite(r.tp));
    CHECK(std::isfinite(r.edge));
    CHECK(std::isfinite(r.dm));
    CHECK(std::isfinite(r.joint));
    CHECK(std::isfinite(r.total));
    CHECK(r.mask >= 0.0);
    CHECK(r.mask <= 1.0);

    bool tem_moved = false, mrd_moved = false;
    for (auto& [name, p] : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i)
            if (p->value[i] != before[name][i]) {
                if (name.rfind("tem.", 0) == 0) tem_moved = true;
                if (name.rfind("mrd.", 0) == 0) mrd_moved = true;
                break;
            }
    }
    CHECK(tem_moved);
    CHECK(mrd_moved);
    CHECK(m.recognizer.checksum() == rec_sum);  // frozen contract
}

TEST_CASE("loss weight algebra under ablations") {
    Fixture f;
    TrainConfig cfg = f.tiny_cfg();
    cfg.lambda_gp = 0.0;
    cfg.lambda_mask = 0.0;
    cfg.lambda_joint = 0.0;
    cfg.no_joint_loss = true;
    ModelBundle m;
    build_models(cfg, f.rec_path, m);
    Trainer tr(m, f.corpus);
    LossRecord r = tr.train_step();
    CHECK(r.total == doctest::Approx(r.tp + r.edge + r.dm).epsilon(1e-12));
    CHECK(r.joint == 0.0);
}

TEST_CASE("identical seeds give identical loss records") {
    Fixture f;
    auto run = [&](int steps) {
        ModelBundle m;
        build_models(f.tiny_cfg(), f.rec_path, m);
        Trainer tr(m, f.corpus);
        std::vector<LossRecord> rs;
        for (int i = 0; i < steps; ++i) rs.push_back(tr.train_step());
        return rs;
    };
    auto a = run(3);
    auto b = run(3);
    for (int i = 0; i < 3; ++i) CHECK(a[i].tsv_line() == b[i].tsv_line());
}

TEST_CASE("resume reproduces the uninterrupted run exactly") {
    Fixture f;
    TrainConfig cfg = f.tiny_cfg();
    cfg.iters = 6;
    cfg.checkpoint_every = 3;

    // uninterrupted
    ModelBundle m1;
    build_models(cfg, f.rec_path, m1);
    Trainer t1(m1, f.corpus);
    std::vector<std::string> full;
    for (int i = 0; i < 6; ++i) full.push_back(t1.train_step().tsv_line());

    // run to the checkpoint via run_training, then resume a fresh trainer
    ModelBundle m2;
    build_models(cfg, f.rec_path, m2);
    Trainer t2(m2, f.corpus);
    t2.run_training(f.dir + "/run");
    REQUIRE(fs::exists(f.dir + "/run/ckpt_3.tsck"));

    ModelBundle m3;
    Trainer t3(m3, f.corpus);
    t3.resume_from(f.dir + "/run/ckpt_3.tsck");
    CHECK(t3.iteration() == 3);
    for (int i = 3; i < 6; ++i) CHECK(t3.train_step().tsv_line() == full[i]);
}

TEST_CASE("no_mask_branch runs and logs the marker") {
    Fixture f;
    TrainConfig cfg = f.tiny_cfg();
    cfg.iters = 2;
    cfg.no_mask_branch = true;
    ModelBundle m;
    build_models(cfg, f.rec_path, m);
    Trainer tr(m, f.corpus);
    LossRecord r = tr.run_training(f.dir + "/nomask");
    CHECK(r.mask == 0.0);
    std::ifstream log(f.dir + "/nomask/train_log.tsv");
    std::string first;
    std::getline(log, first);
    CHECK(first == "# mask=disabled");
}

TEST_CASE("noise-prediction and plain-unet modes train") {
    Fixture f;
    for (const char* flag : {"noise_prediction", "plain_unet"}) {
        TrainConfig cfg = f.tiny_cfg();
        cfg.iters = 2;
        cfg.apply_ablation(flag);
        ModelBundle m;
        build_models(cfg, f.rec_path, m);
        Trainer tr(m, f.corpus);
        LossRecord r1 = tr.train_step();
        LossRecord r2 = tr.train_step();
        CHECK(std::isfinite(r1.total));
        CHECK(std::isfinite(r2.total));
    }
}

TEST_CASE("checkpoint restores bit-identical forward outputs") {
    Fixture f;
    TrainConfig cfg = f.tiny_cfg();
    ModelBundle m;
    build_models(cfg, f.rec_path, m);
    Trainer tr(m, f.corpus);
    tr.train_step();
    TrainerState st{tr.iteration(), "123 456", ""};
    const std::string path = f.dir + "/ck.tsck";
    save_checkpoint(path, m, &tr.opt, st);

    ModelBundle back;
    load_checkpoint(path, back);
    Rng rng(33);
    Tensor lr_up({1, 3, 32, 128});
    rng.fill_gaussian(lr_up, 0.3);
    Tensor a, b;
    {
        Graph g(false);
        a = g.val(m.tem.forward(g, g.leaf(lr_up)).x_sr).clone();
    }
    {
        Graph g(false);
        b = g.val(back.tem.forward(g, g.leaf(lr_up)).x_sr).clone();
    }
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
    CHECK(back.cfg.to_text() == m.cfg.to_text());
}

TEST_CASE("empty corpus is rejected") {
    Fixture f;
    ModelBundle m;
    build_models(f.tiny_cfg(), f.rec_path, m);
    data::Corpus empty;
    CHECK_THROWS_AS(Trainer(m, empty), std::invalid_argument);
}
