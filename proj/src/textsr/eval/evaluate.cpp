#include "textsr/eval/evaluate.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "textsr/eval/metrics.hpp"

namespace textsr::eval {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(c));
    return s;
}

SampleMetrics score_one(const train::ModelBundle& m, const data::SRSample& s, int index,
                        const Tensor& sr) {
    SampleMetrics out;
    out.index = index;
    out.label = s.label;
    out.psnr_db = psnr(sr, s.hr);
    out.ssim_v = ssim(sr, s.hr);
    out.edge = edge_distance(sr, s.hr);
    auto [decoded, prior] = m.recognizer.recognize(sr);
    out.decoded = decoded;
    out.correct = lower(decoded) == lower(s.label);
    return out;
}

void aggregate(const std::vector<SampleMetrics>& rows, real& mpsnr, real& mssim, real& macc,
               real& medge) {
    mpsnr = mssim = macc = medge = 0;
    for (const auto& r : rows) {
        mpsnr += r.psnr_db;
        mssim += r.ssim_v;
        macc += r.correct ? 1.0 : 0.0;
        medge += r.edge;
    }
    const real n = static_cast<real>(rows.size());
    mpsnr /= n;
    mssim /= n;
    macc /= n;
    medge /= n;
}

}  // namespace

EvalReport evaluate_images(const train::ModelBundle& models, const data::Corpus& corpus,
                           const std::vector<Tensor>& sr_images) {
    if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
    if (sr_images.size() != corpus.size())
        throw std::invalid_argument("evaluate: image count does not match corpus");
    EvalReport rep;
    rep.count = static_cast<int>(corpus.size());
    rep.config_echo = models.cfg.to_text();
    for (size_t i = 0; i < corpus.size(); ++i) {
        const auto& s = corpus.samples[i];
        rep.model_rows.push_back(score_one(models, s, static_cast<int>(i), sr_images[i]));
        Tensor bicubic = data::bicubic_resize(s.lr, data::kHrH, data::kHrW);
        rep.bicubic_rows.push_back(
            score_one(models, s, static_cast<int>(i), data::clamp_unit(bicubic)));
    }
    aggregate(rep.model_rows, rep.model_psnr, rep.model_ssim, rep.model_acc, rep.model_edge);
    aggregate(rep.bicubic_rows, rep.bicubic_psnr, rep.bicubic_ssim, rep.bicubic_acc,
              rep.bicubic_edge);
    return rep;
}

EvalReport evaluate(const train::ModelBundle& models, const data::Corpus& corpus,
                    const diffusion::TimestepPlan& plan, uint64_t seed, int batch) {
    std::vector<Tensor> lrs;
    for (const auto& s : corpus.samples) lrs.push_back(s.lr);
    std::vector<Tensor> srs = pipeline::infer_many(models, lrs, plan, seed, false, batch);
    return evaluate_images(models, corpus, srs);
}

std::string EvalReport::to_tsv() const {
    std::ostringstream os;
    os << "index\tmethod\tlabel\tdecoded\tcorrect\tpsnr\tssim\tedge\n";
    auto emit = [&](const char* method, const std::vector<SampleMetrics>& rows) {
        for (const auto& r : rows)
            os << r.index << "\t" << method << "\t" << r.label << "\t" << r.decoded << "\t"
               << (r.correct ? 1 : 0) << "\t" << r.psnr_db << "\t" << r.ssim_v << "\t" << r.edge
               << "\n";
    };
    emit("model", model_rows);
    emit("bicubic", bicubic_rows);
    return os.str();
}

std::string EvalReport::summary() const {
    std::ostringstream os;
    os << "samples: " << count << "\n";
    os << "model   : psnr " << model_psnr << " dB, ssim " << model_ssim << ", accuracy "
       << model_acc * 100.0 << "%, edge " << model_edge << "\n";
    os << "bicubic : psnr " << bicubic_psnr << " dB, ssim " << bicubic_ssim << ", accuracy "
       << bicubic_acc * 100.0 << "%, edge " << bicubic_edge << "\n";
    return os.str();
}

void EvalReport::write(const std::string& out_dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream tsv(fs::path(out_dir) / "report.tsv", std::ios::trunc);
    tsv << to_tsv();
    std::ofstream sum(fs::path(out_dir) / "summary.txt", std::ios::trunc);
    sum << summary() << "\nconfig:\n" << config_echo;
}

}  // namespace textsr::eval
