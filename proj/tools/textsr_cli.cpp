#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>

#include "textsr/data/corpus.hpp"
#include "textsr/eval/evaluate.hpp"
#include "textsr/pipeline/infer.hpp"
#include "textsr/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace textsr;

namespace {

diffusion::TimestepPlan plan_for(const train::ModelBundle& m, int steps) {
    return diffusion::make_plan(m.cfg.T, steps);
}

std::vector<std::string> list_pngs(const std::string& dir, const std::string& suffix) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() >= suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

int run_gen_data(const std::string& out_dir, int count, uint64_t seed, const std::string& split,
                 const std::string& charset, const data::DegradationParams& degrade) {
    data::CorpusManifest m;
    m.charset = charset;
    m.count = count;
    m.seed = seed;
    m.split = split;
    m.degradation = degrade;
    const int written = data::write_corpus(m, out_dir);
    std::printf("wrote %d samples to %s\n", written, out_dir.c_str());
    return 0;
}

int run_train_recognizer(const std::string& data_dir, const std::string& out_path,
                         const train::RecTrainConfig& cfg, const std::string& val_dir) {
    data::Corpus corpus = data::load_corpus(data_dir);
    if (corpus.empty()) throw std::runtime_error("train-recognizer: empty corpus " + data_dir);
    Rng rng(cfg.seed);
    text::RecognizerConfig rc;
    rc.charset = corpus.manifest.charset;
    text::Recognizer rec;
    rec.init(rc, rng);
    train::pretrain_recognizer(rec, corpus, cfg, /*verbose=*/true);
    rec.save(out_path);
    std::printf("saved recognizer to %s\n", out_path.c_str());
    data::Corpus val;
    const data::Corpus* eval_set = &corpus;
    if (!val_dir.empty()) {
        val = data::load_corpus(val_dir);
        eval_set = &val;
    }
    const real acc = train::recognizer_accuracy(rec, *eval_set, true);
    std::printf("clean-HR sequence accuracy: %.2f%%\n", 100.0 * acc);
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& rec_path, const std::string& out_dir,
              const std::string& resume, const std::string& ablation,
              std::optional<uint64_t> seed) {
    train::TrainConfig cfg = train::TrainConfig::load(config_path);
    if (!ablation.empty()) cfg.apply_ablation(ablation);
    if (seed) cfg.seed = *seed;
    data::Corpus corpus = data::load_corpus(data_dir);
    if (corpus.empty()) throw std::runtime_error("train: empty corpus " + data_dir);

    train::ModelBundle models;
    if (resume.empty()) {
        if (rec_path.empty())
            throw std::runtime_error("train: --recognizer required when not resuming");
        train::build_models(cfg, rec_path, models);
    }
    train::Trainer trainer(models, corpus);
    if (!resume.empty()) trainer.resume_from(resume);
    auto last = trainer.run_training(out_dir);
    std::printf("finished at step %lld: %s\n", static_cast<long long>(last.step),
                last.tsv_line().c_str());
    return 0;
}

int run_infer(const std::string& ckpt, const std::string& input, const std::string& out_dir,
              int steps, uint64_t seed, bool cascade) {
    train::ModelBundle models;
    train::load_checkpoint(ckpt, models);
    auto plan = plan_for(models, steps);
    fs::create_directories(out_dir);

    std::vector<std::string> files;
    if (fs::is_directory(input)) {
        files = list_pngs(input, cascade ? ".png" : "_lr.png");
        if (files.empty()) throw std::runtime_error("infer: no inputs in " + input);
    } else {
        files = {input};
    }
    std::vector<Tensor> inputs;
    for (const auto& f : files) inputs.push_back(data::load_image(f));
    std::vector<Tensor> srs =
        pipeline::infer_many(models, inputs, plan, seed, cascade, /*batch=*/8);
    for (size_t i = 0; i < files.size(); ++i) {
        fs::path name = fs::path(files[i]).filename();
        std::string stem = name.stem().string();
        const std::string marker = cascade ? "_cascade_sr" : "_sr";
        data::save_image((fs::path(out_dir) / (stem + marker + ".png")).string(), srs[i]);
    }
    std::printf("wrote %zu images to %s\n", files.size(), out_dir.c_str());
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data_dir, const std::string& out_dir,
             int steps, uint64_t seed) {
    train::ModelBundle models;
    train::load_checkpoint(ckpt, models);
    data::Corpus corpus = data::load_corpus(data_dir);
    if (corpus.empty()) throw std::runtime_error("eval: empty corpus " + data_dir);
    auto report = eval::evaluate(models, corpus, plan_for(models, steps), seed, 8);
    if (!out_dir.empty()) report.write(out_dir);
    std::printf("%s", report.summary().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-text super-resolution pipeline"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    std::string gen_out = "corpus";
    int gen_count = 512;
    uint64_t gen_seed = 7;
    std::string gen_split = "train", gen_charset = "0123456789";
    data::DegradationParams degrade;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--count", gen_count, "sample count");
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--split", gen_split, "train or test");
    gen->add_option("--charset", gen_charset, "characters to draw from");
    gen->add_option("--blur-min", degrade.blur_min, "min blur sigma");
    gen->add_option("--blur-max", degrade.blur_max, "max blur sigma");
    gen->add_option("--noise", degrade.noise_sigma, "additive noise sigma");
    gen->add_option("--jpeg-min", degrade.jpeg_min, "min jpeg quality (>=100 off)");
    gen->add_option("--jpeg-max", degrade.jpeg_max, "max jpeg quality");

    auto* trec = app.add_subcommand("train-recognizer", "pretrain the CTC recognizer");
    std::string trec_data, trec_out = "recognizer.tsck", trec_val;
    train::RecTrainConfig rec_cfg;
    trec->add_option("--data", trec_data, "corpus directory")->required();
    trec->add_option("--out", trec_out, "output checkpoint");
    trec->add_option("--val", trec_val, "held-out corpus for the accuracy line");
    trec->add_option("--iters", rec_cfg.iters, "training iterations");
    trec->add_option("--batch", rec_cfg.batch, "batch size");
    trec->add_option("--lr", rec_cfg.lr, "learning rate");
    trec->add_option("--seed", rec_cfg.seed, "rng seed");

    auto* tr = app.add_subcommand("train", "joint training");
    std::string tr_config, tr_data, tr_rec, tr_out = "run", tr_resume, tr_ablation;
    tr->add_option("--config", tr_config, "train config file")->required();
    tr->add_option("--data", tr_data, "corpus directory")->required();
    tr->add_option("--recognizer", tr_rec, "pretrained recognizer checkpoint");
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");
    tr->add_option("--ablation", tr_ablation, "comma list of ablation flags");
    uint64_t tr_seed_raw = 0;
    auto* seed_opt = tr->add_option("--seed", tr_seed_raw, "override config seed");

    auto* inf = app.add_subcommand("infer", "super-resolve LR inputs");
    std::string inf_ckpt, inf_input, inf_out = "out";
    int inf_steps = 200;
    uint64_t inf_seed = 0;
    inf->add_option("--checkpoint", inf_ckpt, "trained checkpoint")->required();
    inf->add_option("--input", inf_input, "LR png or corpus directory")->required();
    inf->add_option("--out", inf_out, "output directory");
    inf->add_option("--steps", inf_steps, "sampling plan length");
    inf->add_option("--seed", inf_seed, "noise seed");

    auto* cas = app.add_subcommand("cascade", "refine external SR outputs");
    std::string cas_ckpt, cas_input, cas_out = "out";
    int cas_steps = 200;
    uint64_t cas_seed = 0;
    cas->add_option("--checkpoint", cas_ckpt, "trained checkpoint")->required();
    cas->add_option("--input", cas_input, "directory of HR-sized SR pngs")->required();
    cas->add_option("--out", cas_out, "output directory");
    cas->add_option("--steps", cas_steps, "sampling plan length");
    cas->add_option("--seed", cas_seed, "noise seed");

    auto* ev = app.add_subcommand("eval", "metrics over a test corpus");
    std::string ev_ckpt, ev_data, ev_out;
    int ev_steps = 200;
    uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();
    ev->add_option("--data", ev_data, "corpus directory")->required();
    ev->add_option("--out", ev_out, "report directory");
    ev->add_option("--steps", ev_steps, "sampling plan length");
    ev->add_option("--seed", ev_seed, "noise seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 1;
    }

    try {
        if (gen->parsed())
            return run_gen_data(gen_out, gen_count, gen_seed, gen_split, gen_charset, degrade);
        if (trec->parsed()) return run_train_recognizer(trec_data, trec_out, rec_cfg, trec_val);
        if (tr->parsed()) {
            std::optional<uint64_t> tr_seed;
            if (!seed_opt->empty()) tr_seed = tr_seed_raw;
            return run_train(tr_config, tr_data, tr_rec, tr_out, tr_resume, tr_ablation, tr_seed);
        }
        if (inf->parsed())
            return run_infer(inf_ckpt, inf_input, inf_out, inf_steps, inf_seed, false);
        if (cas->parsed())
            return run_infer(cas_ckpt, cas_input, cas_out, cas_steps, cas_seed, true);
        if (ev->parsed()) return run_eval(ev_ckpt, ev_data, ev_out, ev_steps, ev_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
