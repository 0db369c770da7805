#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace textsr::data {

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int w = 0, h = 0, channels = 0;
    std::vector<uint8_t> pix;

    uint8_t& at(int y, int x, int c) { return pix[(static_cast<size_t>(y) * w + x) * channels + c]; }
    uint8_t at(int y, int x, int c) const {
        return pix[(static_cast<size_t>(y) * w + x) * channels + c];
    }
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

}  // namespace textsr::data
