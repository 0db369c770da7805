#include "textsr/text/charset.hpp"

#include <stdexcept>

namespace textsr::text {

Charset::Charset(std::string cs) : chars(std::move(cs)) {
    if (chars.empty()) throw std::invalid_argument("Charset: empty");
    for (size_t i = 0; i < chars.size(); ++i)
        for (size_t j = i + 1; j < chars.size(); ++j)
            if (chars[i] == chars[j]) throw std::invalid_argument("Charset: duplicate character");
}

int Charset::index_of(char c) const {
    const auto pos = chars.find(c);
    if (pos == std::string::npos)
        throw std::invalid_argument(std::string("Charset: character '") + c + "' not in charset");
    return static_cast<int>(pos);
}

std::vector<int> Charset::encode(const std::string& label) const {
    std::vector<int> ids;
    ids.reserve(label.size());
    for (char c : label) ids.push_back(index_of(c));
    return ids;
}

std::string Charset::decapsulate(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= size()) throw std::invalid_argument("Charset: id out of range");
        out.push_back(chars[id]);
    }
    return out;
}

}  // namespace textsr::text
