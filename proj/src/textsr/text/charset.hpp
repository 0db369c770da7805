#pragma once

#include <string>
#include <vector>

namespace textsr::text {

// Class ids follow charset order; the CTC blank takes the last id.
struct Charset {
    std::string chars;

    Charset() = default;
    explicit Charset(std::string cs);

    int size() const { return static_cast<int>(chars.size()); }
    int blank() const { return size(); }
    int num_classes() const { return size() + 1; }

    int index_of(char c) const;  // throws on unknown characters
    std::vector<int> encode(const std::string& label) const;
    std::string decapsulate(const std::vector<int>& ids) const;  // ids -> chars, no blanks
};

}  // namespace textsr::text
