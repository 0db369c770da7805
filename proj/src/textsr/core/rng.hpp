#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "textsr/core/tensor.hpp"

namespace textsr {

// Deterministic RNG used everywhere. Gaussian draws go through our own
// Box-Muller instead of std::normal_distribution, whose stream is
// implementation defined; this keeps corpora and training runs bit
// reproducible for a given seed.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    real uniform() {
        return static_cast<real>(eng_() >> 11) * 0x1.0p-53;
    }

    real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive range
        if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    real gaussian() {
        real u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        real u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    void fill_gaussian(Tensor& t, real sigma = 1.0) {
        real* p = t.data();
        for (int64_t i = 0, n = t.numel(); i < n; ++i) p[i] = sigma * gaussian();
    }

    void fill_uniform(Tensor& t, real lo, real hi) {
        real* p = t.data();
        for (int64_t i = 0, n = t.numel(); i < n; ++i) p[i] = uniform(lo, hi);
    }

    Tensor gaussian_tensor(std::vector<int> shape, real sigma = 1.0) {
        Tensor t(std::move(shape));
        fill_gaussian(t, sigma);
        return t;
    }

    // mt19937_64 state round-trips through text exactly.
    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw std::runtime_error("Rng::load_state: malformed state");
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace textsr
