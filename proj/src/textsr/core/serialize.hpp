#pragma once

#include <map>
#include <string>

#include "textsr/core/tensor.hpp"

namespace textsr {

// Single-file archive of named tensors and text blobs, little-endian,
// doubles stored raw so reloads are bit identical.
struct Archive {
    std::map<std::string, std::string> text;
    std::map<std::string, Tensor> tensors;

    void save(const std::string& path) const;
    static Archive load(const std::string& path);

    const std::string& get_text(const std::string& name) const;
    const Tensor& get_tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const { return tensors.count(name) > 0; }
};

}  // namespace textsr
