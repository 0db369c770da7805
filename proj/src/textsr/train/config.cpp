#include "textsr/train/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace textsr::train {

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (int x : v) {
        if (!s.empty()) s += ",";
        s += std::to_string(x);
    }
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

}  // namespace

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os << "T=" << T << "\n";
    os << "beta_min=" << beta_min << "\n";
    os << "beta_max=" << beta_max << "\n";
    os << "lr=" << lr << "\n";
    os << "batch=" << batch << "\n";
    os << "weight_decay=" << weight_decay << "\n";
    os << "clip_norm=" << clip_norm << "\n";
    os << "iters=" << iters << "\n";
    os << "seed=" << seed << "\n";
    os << "lambda_joint=" << lambda_joint << "\n";
    os << "lambda_gp=" << lambda_gp << "\n";
    os << "lambda_mask=" << lambda_mask << "\n";
    os << "no_mask_branch=" << no_mask_branch << "\n";
    os << "noise_prediction=" << noise_prediction << "\n";
    os << "plain_unet=" << plain_unet << "\n";
    os << "no_joint_loss=" << no_joint_loss << "\n";
    os << "tem_channels=" << tem.channels << "\n";
    os << "tem_blocks=" << tem.blocks << "\n";
    os << "tem_mask_channels=" << tem.mask_channels << "\n";
    os << "unet_base=" << unet.base << "\n";
    os << "unet_mults=" << join_ints(unet.mults) << "\n";
    os << "unet_res_blocks=" << unet.res_blocks << "\n";
    os << "unet_dropout=" << unet.dropout << "\n";
    os << "unet_attn_tail=" << unet.attn_tail << "\n";
    os << "unet_temb_dim=" << unet.temb_dim << "\n";
    os << "unet_gdb_dilations=" << join_ints(unet.gdb_dilations) << "\n";
    os << "log_every=" << log_every << "\n";
    os << "checkpoint_every=" << checkpoint_every << "\n";
    return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: malformed line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    TrainConfig c;
    auto geti = [&](const char* k, int& dst) { if (kv.count(k)) dst = std::stoi(kv[k]); };
    auto getr = [&](const char* k, real& dst) { if (kv.count(k)) dst = std::stod(kv[k]); };
    auto getb = [&](const char* k, bool& dst) { if (kv.count(k)) dst = kv[k] == "1" || kv[k] == "true"; };
    geti("T", c.T);
    getr("beta_min", c.beta_min);
    getr("beta_max", c.beta_max);
    getr("lr", c.lr);
    geti("batch", c.batch);
    getr("weight_decay", c.weight_decay);
    getr("clip_norm", c.clip_norm);
    geti("iters", c.iters);
    if (kv.count("seed")) c.seed = std::stoull(kv["seed"]);
    getr("lambda_joint", c.lambda_joint);
    getr("lambda_gp", c.lambda_gp);
    getr("lambda_mask", c.lambda_mask);
    getb("no_mask_branch", c.no_mask_branch);
    getb("noise_prediction", c.noise_prediction);
    getb("plain_unet", c.plain_unet);
    getb("no_joint_loss", c.no_joint_loss);
    geti("tem_channels", c.tem.channels);
    geti("tem_blocks", c.tem.blocks);
    geti("tem_mask_channels", c.tem.mask_channels);
    geti("unet_base", c.unet.base);
    if (kv.count("unet_mults")) c.unet.mults = split_ints(kv["unet_mults"]);
    geti("unet_res_blocks", c.unet.res_blocks);
    getr("unet_dropout", c.unet.dropout);
    geti("unet_attn_tail", c.unet.attn_tail);
    geti("unet_temb_dim", c.unet.temb_dim);
    if (kv.count("unet_gdb_dilations")) c.unet.gdb_dilations = split_ints(kv["unet_gdb_dilations"]);
    geti("log_every", c.log_every);
    geti("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

void TrainConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("config: cannot write " + path);
    os << to_text();
}

void TrainConfig::validate() const {
    if (T < 1) throw std::invalid_argument("config: T >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw std::invalid_argument("config: bad beta range");
    if (batch < 1) throw std::invalid_argument("config: batch >= 1");
    if (iters < 1) throw std::invalid_argument("config: iters >= 1");
    if (lambda_joint < 0 || lambda_gp < 0 || lambda_mask < 0)
        throw std::invalid_argument("config: loss weights must be >= 0");
    unet.validate();
}

void TrainConfig::apply_ablation(const std::string& flags) {
    std::istringstream is(flags);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        if (tok == "no_mask_branch") no_mask_branch = true;
        else if (tok == "noise_prediction") noise_prediction = true;
        else if (tok == "plain_unet") plain_unet = true;
        else if (tok == "no_joint_loss") no_joint_loss = true;
        else throw std::invalid_argument("unknown ablation flag: " + tok);
    }
}

}  // namespace textsr::train
