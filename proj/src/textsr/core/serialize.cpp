#include "textsr/core/serialize.hpp"

#include <cstdint>
#include <fstream>

namespace textsr {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'R', 'A', 'R', 'C', 'H', '1'};

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    const uint64_t n = get_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

}  // namespace

void Archive::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("Archive::save: cannot open " + path);
    os.write(kMagic, 8);
    put_u32(os, static_cast<uint32_t>(text.size()));
    for (const auto& [name, blob] : text) {
        put_str(os, name);
        put_str(os, blob);
    }
    put_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_str(os, name);
        put_u32(os, static_cast<uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) put_u32(os, static_cast<uint32_t>(t.dim(i)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(sizeof(real) * t.numel()));
    }
    if (!os) throw std::runtime_error("Archive::save: write failed on " + path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("Archive::load: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kMagic, 8))
        throw std::runtime_error("Archive::load: bad magic in " + path);
    Archive a;
    const uint32_t ntext = get_u32(is);
    for (uint32_t i = 0; i < ntext; ++i) {
        std::string name = get_str(is);
        a.text[name] = get_str(is);
    }
    const uint32_t ntens = get_u32(is);
    for (uint32_t i = 0; i < ntens; ++i) {
        std::string name = get_str(is);
        const uint32_t nd = get_u32(is);
        std::vector<int> shape(nd);
        for (uint32_t d = 0; d < nd; ++d) shape[d] = static_cast<int>(get_u32(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(real) * t.numel()));
        a.tensors[name] = std::move(t);
    }
    if (!is) throw std::runtime_error("Archive::load: truncated file " + path);
    return a;
}

const std::string& Archive::get_text(const std::string& name) const {
    auto it = text.find(name);
    if (it == text.end()) throw std::runtime_error("Archive: missing text " + name);
    return it->second;
}

const Tensor& Archive::get_tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("Archive: missing tensor " + name);
    return it->second;
}

}  // namespace textsr
