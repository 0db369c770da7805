#include "textsr/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace textsr::data {

namespace {

// 5x7 bitmap face, '#' = ink.
const std::map<char, std::array<const char*, 7>>& glyph_table() {
    static const std::map<char, std::array<const char*, 7>> table = {
        {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
        {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
        {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
        {'3', {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."}},
        {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
        {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
        {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
        {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
        {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
        {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
        {'a', {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
        {'b', {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."}},
        {'c', {".....", ".....", ".###.", "#....", "#....", "#...#", ".###."}},
        {'d', {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"}},
        {'e', {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."}},
        {'f', {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."}},
        {'g', {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."}},
        {'h', {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"}},
        {'i', {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
        {'j', {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
        {'k', {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
        {'l', {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
        {'m', {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"}},
        {'n', {".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#"}},
        {'o', {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."}},
        {'p', {".....", "####.", "#...#", "#...#", "####.", "#....", "#...."}},
        {'q', {".....", ".####", "#...#", "#...#", ".####", "....#", "....#"}},
        {'r', {".....", ".....", "#.##.", "##...", "#....", "#....", "#...."}},
        {'s', {".....", ".....", ".####", "#....", ".###.", "....#", "####."}},
        {'t', {".#...", ".#...", "####.", ".#...", ".#...", ".#..#", "..##."}},
        {'u', {".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####"}},
        {'v', {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
        {'w', {".....", ".....", "#.#.#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
        {'x', {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
        {'y', {".....", "#...#", "#...#", "#...#", ".####", "....#", ".###."}},
        {'z', {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"}},
    };
    return table;
}

struct GlyphBitmap {
    // 7 rows x 5 cols, values 0/1
    std::array<std::array<real, 5>, 7> cell{};
};

GlyphBitmap glyph_bitmap(char ch, bool bold) {
    auto it = glyph_table().find(ch);
    if (it == glyph_table().end())
        throw std::invalid_argument(std::string("no glyph for character '") + ch + "'");
    GlyphBitmap g;
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c) g.cell[r][c] = it->second[r][c] == '#' ? 1.0 : 0.0;
    if (bold) {
        GlyphBitmap d = g;
        for (int r = 0; r < 7; ++r)
            for (int c = 1; c < 5; ++c) d.cell[r][c] = std::max(g.cell[r][c], g.cell[r][c - 1]);
        g = d;
    }
    return g;
}

// Bilinear sample of the 5x7 grid at fractional cell coordinates; cell
// centers sit at integer+0.5, outside is empty.
real sample_bitmap(const GlyphBitmap& g, real u, real v) {
    const real x = u - 0.5, y = v - 0.5;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const real fx = x - x0, fy = y - y0;
    auto at = [&](int yy, int xx) -> real {
        if (yy < 0 || yy >= 7 || xx < 0 || xx >= 5) return 0.0;
        return g.cell[yy][xx];
    };
    return at(y0, x0) * (1 - fx) * (1 - fy) + at(y0, x0 + 1) * fx * (1 - fy) +
           at(y0 + 1, x0) * (1 - fx) * fy + at(y0 + 1, x0 + 1) * fx * fy;
}

struct FontSpec {
    bool bold = false;
    real shear = 0.0;
    real xscale = 1.0;
};

FontSpec font_spec(const std::string& name) {
    if (name == "regular") return {false, 0.0, 1.0};
    if (name == "bold") return {true, 0.0, 1.05};
    if (name == "slant") return {false, 0.25, 1.0};
    if (name == "narrow") return {false, 0.0, 0.78};
    throw std::runtime_error("font not available: " + name);
}

real gray_of(real r, real g, real b) { return (r + g + b) / 3.0; }

}  // namespace

std::vector<std::string> builtin_fonts() { return {"regular", "bold", "slant", "narrow"}; }

void check_charset(const std::string& charset) {
    if (charset.empty()) throw std::invalid_argument("charset: empty");
    std::string seen;
    for (char c : charset) {
        if (seen.find(c) != std::string::npos)
            throw std::invalid_argument("charset: duplicate character");
        if (glyph_table().find(c) == glyph_table().end())
            throw std::invalid_argument(std::string("charset: no glyph for '") + c + "'");
        seen.push_back(c);
    }
}

SRSample render_sample(uint64_t rng_seed, const std::string& charset,
                       const std::vector<std::string>& fonts, const DegradationParams& degrade) {
    check_charset(charset);
    if (fonts.empty()) throw std::runtime_error("render_sample: no fonts available");
    Rng rng(rng_seed);

    // label
    const int len = rng.uniform_int(4, 10);
    std::string label;
    for (int i = 0; i < len; ++i) label.push_back(charset[rng.uniform_int(0, (int)charset.size() - 1)]);

    const FontSpec font = font_spec(fonts[rng.uniform_int(0, (int)fonts.size() - 1)]);

    // colors, both in [0,1]; resample fg until the gray contrast is strong
    real bg0[3], bg1[3], fg[3];
    for (int c = 0; c < 3; ++c) bg0[c] = rng.uniform(0.0, 1.0);
    for (int c = 0; c < 3; ++c) bg1[c] = std::clamp(bg0[c] + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    const real bg_gray = gray_of((bg0[0] + bg1[0]) / 2, (bg0[1] + bg1[1]) / 2,
                                 (bg0[2] + bg1[2]) / 2);
    for (int tries = 0; tries < 64; ++tries) {
        for (int c = 0; c < 3; ++c) fg[c] = rng.uniform(0.0, 1.0);
        if (std::fabs(gray_of(fg[0], fg[1], fg[2]) - bg_gray) >= 0.45) break;
        if (tries == 63) {
            // force a contrasting ink
            const real v = bg_gray > 0.5 ? 0.05 : 0.95;
            fg[0] = fg[1] = fg[2] = v;
        }
    }

    // geometry
    int gh = rng.uniform_int(16, 24);
    const int spacing = rng.uniform_int(1, 3);
    auto advance_of = [&](int height) {
        return static_cast<int>(std::lround(height * (5.0 / 7.0) * font.xscale)) + spacing;
    };
    while (gh > 10 && len * advance_of(gh) - spacing > kHrW - 6) --gh;
    const int adv = advance_of(gh);
    const int gw = adv - spacing;
    const int total_w = len * adv - spacing;
    int x0 = (kHrW - total_w) / 2 + rng.uniform_int(-3, 3);
    x0 = std::clamp(x0, 1, std::max(1, kHrW - total_w - 1));
    int y0 = (kHrH - gh) / 2 + rng.uniform_int(-2, 2);
    y0 = std::clamp(y0, 1, std::max(1, kHrH - gh - 1));

    // background: corner-to-corner gradient plus faint per-pixel noise
    Tensor hr01({3, kHrH, kHrW});
    for (int y = 0; y < kHrH; ++y)
        for (int x = 0; x < kHrW; ++x) {
            const real tmix = (static_cast<real>(x) / (kHrW - 1) +
                               static_cast<real>(y) / (kHrH - 1)) * 0.5;
            for (int c = 0; c < 3; ++c)
                hr01[(static_cast<int64_t>(c) * kHrH + y) * kHrW + x] =
                    bg0[c] * (1 - tmix) + bg1[c] * tmix;
        }
    for (int64_t i = 0; i < hr01.numel(); ++i)
        hr01[i] = std::clamp<real>(hr01[i] + 0.015 * rng.gaussian(), 0.0, 1.0);

    // glyph alpha accumulation
    Tensor alpha({1, kHrH, kHrW}, 0.0);
    std::vector<GlyphBitmap> bitmaps;
    for (char ch : label) bitmaps.push_back(glyph_bitmap(ch, font.bold));
    for (int gi = 0; gi < len; ++gi) {
        const int gx = x0 + gi * adv;
        for (int y = std::max(0, y0 - 1); y < std::min(kHrH, y0 + gh + 1); ++y)
            for (int x = std::max(0, gx - gh); x < std::min(kHrW, gx + gw + gh); ++x) {
                const real vy = (y - y0 + 0.5) / gh * 7.0;
                const real sheared_x = x + font.shear * (y - y0 - gh / 2.0);
                const real ux = (sheared_x - gx + 0.5) / gw * 5.0;
                const real a = sample_bitmap(bitmaps[gi], ux, vy);
                if (a <= 0.0) continue;
                real& cur = alpha[static_cast<int64_t>(y) * kHrW + x];
                cur = std::max(cur, std::min<real>(a, 1.0));
            }
    }

    // composite ink over background
    for (int y = 0; y < kHrH; ++y)
        for (int x = 0; x < kHrW; ++x) {
            const real a = alpha[static_cast<int64_t>(y) * kHrW + x];
            if (a <= 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                real& v = hr01[(static_cast<int64_t>(c) * kHrH + y) * kHrW + x];
                v = v * (1 - a) + fg[c] * a;
            }
        }

    // degradation draws happen in a fixed order
    const real sigma = rng.uniform(degrade.blur_min, degrade.blur_max);
    const int jq = degrade.jpeg_min >= 100 ? 100 : rng.uniform_int(degrade.jpeg_min,
                                                                   degrade.jpeg_max);

    Tensor hr = Tensor(hr01.shape());
    for (int64_t i = 0; i < hr.numel(); ++i) hr[i] = hr01[i] * 2.0 - 1.0;

    Tensor lr = gaussian_blur(hr, sigma);
    lr = area_downsample2(lr);
    lr = add_gaussian_noise(lr, degrade.noise_sigma * 2.0, rng);  // [0,1] sigma in [-1,1] units
    if (jq < 100) lr = jpeg_like(lr, jq);
    lr = clamp_unit(lr);

    SRSample s;
    s.hr = std::move(hr);
    s.lr = std::move(lr);
    s.mask_gt = Tensor({1, kHrH, kHrW});
    for (int64_t i = 0; i < alpha.numel(); ++i) s.mask_gt[i] = alpha[i] > 0.5 ? 1.0 : 0.0;
    s.label = label;
    return s;
}

Tensor mask_from_rgb(const Tensor& img) {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("mask_from_rgb: expects (3,H,W)");
    const int h = img.dim(1), w = img.dim(2);
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<real> gray(hw);
    for (int64_t i = 0; i < hw; ++i)
        gray[i] = (img[i] + img[hw + i] + img[2 * hw + i]) / 3.0;
    real thresh = 0;
    for (int64_t i = 0; i < hw; ++i) thresh += gray[i];
    thresh /= static_cast<real>(hw);
    int64_t bright = 0;
    for (int64_t i = 0; i < hw; ++i) bright += gray[i] > thresh;
    Tensor mask({1, h, w}, 0.0);
    if (bright == 0 || bright == hw) return mask;  // constant image: no text
    const bool text_is_bright = bright <= hw - bright;  // ties go to the bright class
    for (int64_t i = 0; i < hw; ++i)
        mask[i] = (gray[i] > thresh) == text_is_bright ? 1.0 : 0.0;
    return mask;
}

}  // namespace textsr::data
