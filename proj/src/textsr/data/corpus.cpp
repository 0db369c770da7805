#include "textsr/data/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace textsr::data {

namespace fs = std::filesystem;

void CorpusManifest::validate() const {
    check_charset(charset);
    if (count < 1) throw std::invalid_argument("manifest: count must be >= 1");
    if (split != "train" && split != "test")
        throw std::invalid_argument("manifest: split must be train or test");
    if (fonts.empty()) throw std::invalid_argument("manifest: no fonts");
}

std::string CorpusManifest::to_text() const {
    std::ostringstream os;
    os << "charset=" << charset << "\n";
    os << "count=" << count << "\n";
    os << "seed=" << seed << "\n";
    os << "split=" << split << "\n";
    os << "blur_min=" << degradation.blur_min << "\n";
    os << "blur_max=" << degradation.blur_max << "\n";
    os << "noise_sigma=" << degradation.noise_sigma << "\n";
    os << "jpeg_min=" << degradation.jpeg_min << "\n";
    os << "jpeg_max=" << degradation.jpeg_max << "\n";
    std::string f;
    for (const auto& name : fonts) {
        if (!f.empty()) f += ",";
        f += name;
    }
    os << "fonts=" << f << "\n";
    return os.str();
}

CorpusManifest CorpusManifest::from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("manifest: malformed line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::runtime_error("manifest: missing key " + k);
        return it->second;
    };
    CorpusManifest m;
    m.charset = need("charset");
    m.count = std::stoi(need("count"));
    m.seed = std::stoull(need("seed"));
    m.split = need("split");
    m.degradation.blur_min = std::stod(need("blur_min"));
    m.degradation.blur_max = std::stod(need("blur_max"));
    m.degradation.noise_sigma = std::stod(need("noise_sigma"));
    m.degradation.jpeg_min = std::stoi(need("jpeg_min"));
    m.degradation.jpeg_max = std::stoi(need("jpeg_max"));
    m.fonts.clear();
    std::istringstream fs_(need("fonts"));
    std::string name;
    while (std::getline(fs_, name, ',')) m.fonts.push_back(name);
    m.validate();
    return m;
}

namespace {

std::string index_name(int i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%06d_%s.png", i, suffix);
    return buf;
}

}  // namespace

int write_corpus(const CorpusManifest& manifest, const std::string& out_dir) {
    manifest.validate();
    fs::create_directories(out_dir);
    std::ofstream labels(fs::path(out_dir) / "labels.tsv", std::ios::trunc);
    if (!labels) throw std::runtime_error("write_corpus: cannot write labels.tsv");
    for (int i = 0; i < manifest.count; ++i) {
        SRSample s = render_sample(manifest.seed + static_cast<uint64_t>(i), manifest.charset,
                                   manifest.fonts, manifest.degradation);
        save_image((fs::path(out_dir) / index_name(i, "lr")).string(), s.lr);
        save_image((fs::path(out_dir) / index_name(i, "hr")).string(), s.hr);
        // mask as 1-channel png in {0,255}
        ImageU8 m;
        m.w = kHrW;
        m.h = kHrH;
        m.channels = 1;
        m.pix.resize(static_cast<size_t>(kHrH) * kHrW);
        for (int64_t p = 0; p < s.mask_gt.numel(); ++p)
            m.pix[p] = s.mask_gt[p] > 0.5 ? 255 : 0;
        write_png((fs::path(out_dir) / index_name(i, "mask")).string(), m);
        labels << i << "\t" << s.label << "\n";
    }
    std::ofstream mf(fs::path(out_dir) / "manifest", std::ios::trunc);
    if (!mf) throw std::runtime_error("write_corpus: cannot write manifest");
    mf << manifest.to_text();
    return manifest.count;
}

Corpus load_corpus(const std::string& dir) {
    Corpus corpus;
    const fs::path root(dir);
    if (!fs::exists(root / "manifest")) {
        // empty or nonexistent directory loads as an empty corpus
        if (fs::exists(root) && !fs::is_empty(root)) {
            for (const auto& e : fs::directory_iterator(root))
                if (e.path().extension() == ".png")
                    throw std::runtime_error("load_corpus: images present but manifest missing in " +
                                             dir);
        }
        return corpus;
    }
    std::ifstream mf(root / "manifest");
    std::stringstream buf;
    buf << mf.rdbuf();
    corpus.manifest = CorpusManifest::from_text(buf.str());

    std::ifstream labels(root / "labels.tsv");
    if (!labels) throw std::runtime_error("load_corpus: missing labels.tsv in " + dir);
    std::map<int, std::string> label_by_index;
    std::string line;
    while (std::getline(labels, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("load_corpus: malformed labels.tsv line: " + line);
        label_by_index[std::stoi(line.substr(0, tab))] = line.substr(tab + 1);
    }
    if (static_cast<int>(label_by_index.size()) != corpus.manifest.count)
        throw std::runtime_error("load_corpus: label count does not match manifest");

    corpus.samples.reserve(corpus.manifest.count);
    for (int i = 0; i < corpus.manifest.count; ++i) {
        auto it = label_by_index.find(i);
        if (it == label_by_index.end())
            throw std::runtime_error("load_corpus: missing label for index " + std::to_string(i));
        SRSample s;
        s.label = it->second;
        if (s.label.empty() || s.label.size() > 16)
            throw std::runtime_error("load_corpus: bad label length at index " + std::to_string(i));
        for (char c : s.label)
            if (corpus.manifest.charset.find(c) == std::string::npos)
                throw std::runtime_error("load_corpus: label character outside charset at index " +
                                         std::to_string(i));
        s.lr = load_image((root / index_name(i, "lr")).string());
        s.hr = load_image((root / index_name(i, "hr")).string());
        Tensor mask_img = load_image((root / index_name(i, "mask")).string());
        if (s.lr.shape() != std::vector<int>{3, kLrH, kLrW})
            throw std::runtime_error("load_corpus: bad lr shape at index " + std::to_string(i));
        if (s.hr.shape() != std::vector<int>{3, kHrH, kHrW})
            throw std::runtime_error("load_corpus: bad hr shape at index " + std::to_string(i));
        if (mask_img.shape() != std::vector<int>{1, kHrH, kHrW})
            throw std::runtime_error("load_corpus: bad mask shape at index " + std::to_string(i));
        s.mask_gt = Tensor({1, kHrH, kHrW});
        for (int64_t p = 0; p < mask_img.numel(); ++p)
            s.mask_gt[p] = mask_img[p] > 0.0 ? 1.0 : 0.0;
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace textsr::data
