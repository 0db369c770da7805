#pragma once

#include <string>
#include <vector>

#include "textsr/data/synth.hpp"

namespace textsr::data {

struct CorpusManifest {
    std::string charset = "0123456789";
    int count = 0;
    uint64_t seed = 0;
    std::string split = "train";  // train | test
    DegradationParams degradation;
    std::vector<std::string> fonts = builtin_fonts();

    void validate() const;
    std::string to_text() const;  // flat key=value lines
    static CorpusManifest from_text(const std::string& text);
};

// Directory layout: {index:06}_lr.png / _hr.png / _mask.png, labels.tsv
// (index TAB label) and a `manifest` key=value file. PNGs are 8-bit; the
// [-1,1] <-> 8-bit mapping is v = round((x+1)*127.5).
int write_corpus(const CorpusManifest& manifest, const std::string& out_dir);

struct Corpus {
    CorpusManifest manifest;
    std::vector<SRSample> samples;

    bool empty() const { return samples.empty(); }
    size_t size() const { return samples.size(); }
};

// An empty directory (no manifest) loads as an empty corpus; a present but
// inconsistent corpus (missing files, malformed manifest, labels outside
// the charset) is an error.
Corpus load_corpus(const std::string& dir);

}  // namespace textsr::data
