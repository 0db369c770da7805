#include "textsr/train/checkpoint.hpp"

#include <sstream>

#include "textsr/core/serialize.hpp"

namespace textsr::train {

nn::ParamMap ModelBundle::trainable_params() {
    nn::ParamMap m;
    tem.collect(m, "tem");
    mrd.collect(m, "mrd");
    return m;
}

nn::ParamMap ModelBundle::all_params() {
    nn::ParamMap m = trainable_params();
    recognizer.collect(m, "rec");
    return m;
}

void build_models(const TrainConfig& cfg, const std::string& recognizer_path, ModelBundle& out) {
    cfg.validate();
    out.cfg = cfg;
    out.sched = diffusion::make_linear_schedule(cfg.T, cfg.beta_min, cfg.beta_max);
    out.recognizer = text::Recognizer::load(recognizer_path);
    out.recognizer.freeze();
    Rng rng(cfg.seed);
    out.tem.init(cfg.tem, &out.recognizer, rng);
    model::UNetConfig uc = cfg.unet;
    out.mrd.init(uc, rng);
}

void save_checkpoint(const std::string& path, ModelBundle& models, const AdamW* opt,
                     const TrainerState& state) {
    Archive a;
    a.text["train_config"] = models.cfg.to_text();
    a.text["iteration"] = std::to_string(state.iteration);
    a.text["rng_state"] = state.rng_state;
    a.text["loss_tail"] = state.loss_tail;
    std::ostringstream rc;
    rc << "charset=" << models.recognizer.cfg.charset << "\n"
       << "base=" << models.recognizer.cfg.base << "\n"
       << "deep=" << models.recognizer.cfg.deep << "\n"
       << "gru_hidden=" << models.recognizer.cfg.gru_hidden << "\n"
       << "feature_taps=" << models.recognizer.cfg.feature_taps << "\n";
    a.text["recognizer_config"] = rc.str();
    nn::ParamMap m = models.all_params();
    for (const auto& [name, p] : m) a.tensors[name] = p->value;
    if (opt) {
        for (const auto& [name, t] : opt->export_state()) a.tensors["opt." + name] = t;
        a.text["opt_steps"] = std::to_string(opt->steps_taken());
    }
    a.save(path);
}

void load_checkpoint(const std::string& path, ModelBundle& out, AdamW* opt, TrainerState* state) {
    Archive a = Archive::load(path);
    out.cfg = TrainConfig::from_text(a.get_text("train_config"));
    out.sched = diffusion::make_linear_schedule(out.cfg.T, out.cfg.beta_min, out.cfg.beta_max);

    // recognizer rebuilt from its stored config, weights from the archive
    std::istringstream is(a.get_text("recognizer_config"));
    text::RecognizerConfig rc;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "charset") rc.charset = val;
        else if (key == "base") rc.base = std::stoi(val);
        else if (key == "deep") rc.deep = std::stoi(val);
        else if (key == "gru_hidden") rc.gru_hidden = std::stoi(val);
        else if (key == "feature_taps") rc.feature_taps = std::stoi(val);
    }
    Rng rng(out.cfg.seed);
    out.recognizer.init(rc, rng);
    out.tem.init(out.cfg.tem, &out.recognizer, rng);
    out.mrd.init(out.cfg.unet, rng);

    nn::ParamMap m = out.all_params();
    for (auto& [name, p] : m) {
        const Tensor& t = a.get_tensor(name);
        if (!t.same_shape(p->value))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p->value = t.clone();
    }
    out.recognizer.freeze();

    if (opt) {
        std::map<std::string, Tensor> st;
        for (const auto& [name, t] : a.tensors)
            if (name.rfind("opt.", 0) == 0) st[name.substr(4)] = t;
        int64_t steps = 0;
        if (a.text.count("opt_steps")) steps = std::stoll(a.get_text("opt_steps"));
        opt->import_state(st, steps);
    }
    if (state) {
        state->iteration = std::stoll(a.get_text("iteration"));
        state->rng_state = a.get_text("rng_state");
        state->loss_tail = a.get_text("loss_tail");
    }
}

}  // namespace textsr::train
