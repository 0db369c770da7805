#include "textsr/text/recognizer.hpp"

#include <sstream>

namespace textsr::text {

namespace o = textsr::ops;

void Recognizer::init(const RecognizerConfig& config, Rng& rng) {
    cfg = config;
    charset = Charset(cfg.charset);
    const int b = cfg.base;
    const int d = cfg.deep;
    if (cfg.feature_taps < 1 || cfg.feature_taps > 5)
        throw std::invalid_argument("Recognizer: feature_taps must be in [1,5]");
    c1.init(3, b, 3, rng);
    c2.init(b, 2 * b, 3, rng);
    c3.init(2 * b, d, 3, rng);
    c4.init(d, d, 3, rng);
    c5.init(d, d, 3, rng);
    rnn.init(d, cfg.gru_hidden, rng);
    head.init(2 * cfg.gru_hidden, charset.num_classes(), rng);
}

Recognizer::Forward Recognizer::forward(Graph& g, Val imgs) const {
    Forward f;
    Recognizer* self = const_cast<Recognizer*>(this);
    const Tensor& xt = g.val(imgs);
    if (xt.ndim() != 4 || xt.dim(1) != 3)
        throw std::invalid_argument("Recognizer: expects (N,3,H,W)");
    if (xt.dim(2) % 4 || xt.dim(3) % 4)
        throw std::invalid_argument("Recognizer: H and W must be divisible by 4");

    Val h1 = o::relu(self->c1(g, imgs));
    Val p1 = o::avg_pool(h1, 2, 2);
    Val h2 = o::relu(self->c2(g, p1));
    Val p2 = o::avg_pool(h2, 2, 2);
    Val h3 = o::relu(self->c3(g, p2));
    Val h4 = o::relu(self->c4(g, h3));
    Val h5 = o::relu(self->c5(g, h4));
    f.taps = {h1, h2, h3, h4, h5};
    f.taps.resize(cfg.feature_taps);

    // collapse height, sequence over width: (N,D,H,W) -> (W, N, D)
    Val row = o::mean_h(h5);
    Val seq = o::permute(row, {1, 0, 2});
    f.feat_seq = rnn.run(g, seq);             // (W, N, 2H)
    f.logits = apply_head(g, f.feat_seq);
    return f;
}

Val Recognizer::encode_seq(Graph& g, Val imgs) const {
    return forward(g, imgs).feat_seq;
}

Val Recognizer::apply_head(Graph& g, Val seq) const {
    Recognizer* self = const_cast<Recognizer*>(this);
    const int L = g.val(seq).dim(0);
    const int N = g.val(seq).dim(1);
    const int F = g.val(seq).dim(2);
    Val flat = o::reshape(seq, {L * N, F});
    return o::reshape(self->head(g, flat), {L, N, charset.num_classes()});
}

std::pair<std::string, TextPrior> Recognizer::recognize(const Tensor& img) const {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("recognize: expects (3,H,W)");
    Graph g(false);
    Val batch = g.leaf(img.reshaped({1, 3, img.dim(1), img.dim(2)}));
    Forward f = forward(g, batch);
    const Tensor& logits = g.val(f.logits);  // (L, 1, C)
    const int L = logits.dim(0), C = logits.dim(2);
    Tensor seq({L, C});
    std::copy(logits.data(), logits.data() + logits.numel(), seq.data());
    TextPrior prior;
    prior.probs = Tensor({L, C});
    for (int t = 0; t < L; ++t) {
        const real* row = seq.data() + static_cast<int64_t>(t) * C;
        real* out = prior.probs.data() + static_cast<int64_t>(t) * C;
        real mx = row[0];
        for (int k = 1; k < C; ++k) mx = std::max(mx, row[k]);
        real s = 0;
        for (int k = 0; k < C; ++k) {
            out[k] = std::exp(row[k] - mx);
            s += out[k];
        }
        for (int k = 0; k < C; ++k) out[k] /= s;
    }
    return {ctc_greedy_decode(seq, charset), prior};
}

FeatureStack Recognizer::extract_features(const Tensor& img) const {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("extract_features: expects (3,H,W)");
    Graph g(false);
    Val batch = g.leaf(img.reshaped({1, 3, img.dim(1), img.dim(2)}));
    Forward f = forward(g, batch);
    FeatureStack out;
    for (Val v : f.taps) out.features.push_back(g.val(v).clone());
    return out;
}

Val Recognizer::perceptual_loss(Graph& g, Val pred, Val target) const {
    check_same_shape(g.val(pred), g.val(target), "perceptual_loss");
    Forward fp = forward(g, pred);
    Forward ft = forward(g, target);
    Val total{};
    for (int i = 0; i < cfg.feature_taps; ++i) {
        Val term = o::mean_abs(o::sub(fp.taps[i], ft.taps[i]));
        total = total.ok() ? o::add(total, term) : term;
    }
    return total;
}

Val Recognizer::tp_loss(Val prior_logits, const std::vector<std::string>& labels) const {
    std::vector<std::vector<int>> targets;
    targets.reserve(labels.size());
    for (const auto& s : labels) targets.push_back(charset.encode(s));
    return ctc_loss(prior_logits, targets, charset.blank());
}

void Recognizer::collect(nn::ParamMap& m, const std::string& prefix) const {
    Recognizer* self = const_cast<Recognizer*>(this);
    self->c1.collect(m, prefix + ".c1");
    self->c2.collect(m, prefix + ".c2");
    self->c3.collect(m, prefix + ".c3");
    self->c4.collect(m, prefix + ".c4");
    self->c5.collect(m, prefix + ".c5");
    self->rnn.collect(m, prefix + ".rnn");
    self->head.collect(m, prefix + ".head");
}

void Recognizer::freeze() {
    nn::ParamMap m;
    collect(m);
    for (auto& [name, p] : m) p->trainable = false;
    frozen_ = true;
}

uint64_t Recognizer::checksum() const {
    nn::ParamMap m;
    collect(m);
    return nn::param_checksum(m);
}

void Recognizer::save(const std::string& path) const {
    Archive a;
    std::ostringstream cfg_text;
    cfg_text << "charset=" << cfg.charset << "\n"
             << "base=" << cfg.base << "\n"
             << "deep=" << cfg.deep << "\n"
             << "gru_hidden=" << cfg.gru_hidden << "\n"
             << "feature_taps=" << cfg.feature_taps << "\n";
    a.text["recognizer_config"] = cfg_text.str();
    nn::ParamMap m;
    collect(m);
    for (const auto& [name, p] : m) a.tensors[name] = p->value;
    a.save(path);
}

Recognizer Recognizer::load(const std::string& path) {
    Archive a = Archive::load(path);
    std::istringstream is(a.get_text("recognizer_config"));
    RecognizerConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "charset") cfg.charset = val;
        else if (key == "base") cfg.base = std::stoi(val);
        else if (key == "deep") cfg.deep = std::stoi(val);
        else if (key == "gru_hidden") cfg.gru_hidden = std::stoi(val);
        else if (key == "feature_taps") cfg.feature_taps = std::stoi(val);
    }
    Rng rng(0);
    Recognizer r;
    r.init(cfg, rng);
    nn::ParamMap m;
    r.collect(m);
    for (auto& [name, p] : m) {
        const Tensor& t = a.get_tensor(name);
        if (!t.same_shape(p->value))
            throw std::runtime_error("Recognizer::load: shape mismatch for " + name);
        p->value = t.clone();
    }
    return r;
}

}  // namespace textsr::text
